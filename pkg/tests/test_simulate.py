import csv
import io
import json
import math

import numpy as np
import pytest

from dackrr import rng
from dackrr.errors import ParameterError
from dackrr.kernel import KernelSpec
from dackrr.simulate import COLUMNS, SimConfig, run_coverage, simulate_data, sin_tau, wilson_interval


def test_target_quarter_turn():
    assert sin_tau(np.array([0.25]))[0] == 1.0


def test_noiseless_data():
    cfg = SimConfig(n=50, sigma=0.0, P_list=(1,))
    X, y = simulate_data(cfg, 3)
    assert X.shape == (50, 1) and np.all((0 <= X) & (X <= 1))
    np.testing.assert_array_equal(y, np.sin(2 * np.pi * X[:, 0]))


def test_noise_mean():
    n = 10**5
    cfg = SimConfig(n=n, sigma=1.0, P_list=(1,))
    _, y = simulate_data(cfg, 11)
    # E[sin(2 pi U)] = 0, Var = 1/2 + 1
    assert abs(y.mean()) <= 3 * math.sqrt(1.5 / n)


def test_rademacher_noise():
    cfg = SimConfig(n=200, sigma=0.5, noise="rademacher", P_list=(1,))
    X, y = simulate_data(cfg, 0)
    np.testing.assert_allclose(np.abs(y - np.sin(2 * np.pi * X[:, 0])), 0.5, rtol=1e-12)


def test_data_reproducible():
    cfg = SimConfig(n=30, P_list=(1,))
    a, b = simulate_data(cfg, 5), simulate_data(cfg, 5)
    np.testing.assert_array_equal(a[1], b[1])


class TestWilson:
    def test_oracle(self):
        # closed form with z = 1.95996398454005, evaluated at 40 digits in mpmath
        lo, hi = wilson_interval(95, 100)
        assert lo == pytest.approx(0.88824953076808085454, abs=1e-12)
        assert hi == pytest.approx(0.97845632084563202926, abs=1e-12)

    def test_boundaries(self):
        assert wilson_interval(0, 10)[0] == 0.0
        assert wilson_interval(10, 10)[1] == 1.0

    @pytest.mark.parametrize("hits,trials", [(0, 1), (1, 1), (3, 7), (190, 200), (200, 200)])
    def test_contains_point_estimate(self, hits, trials):
        lo, hi = wilson_interval(hits, trials)
        assert 0.0 <= lo <= hits / trials <= hi <= 1.0

    def test_rejects(self):
        with pytest.raises(ParameterError):
            wilson_interval(5, 4)
        with pytest.raises(ParameterError):
            wilson_interval(0, 0)


def _small_cfg(**kw):
    base = dict(n=256, P_list=(4, 16), B=100, trials=6, grid_size=64, seed=7)
    base.update(kw)
    return SimConfig(**base)


class TestRunCoverage:
    def test_report_shape(self):
        report = run_coverage(_small_cfg())
        assert [r.P for r in report.per_P] == [4, 16]
        for r in report.per_P:
            assert 0 <= r.hits <= r.trials == 6
            assert r.coverage == r.hits / r.trials
            assert r.wilson_lo <= r.coverage <= r.wilson_hi
            assert r.mean_radius > 0 and r.mean_rmse > 0

    def test_noiseless_smoke(self):
        report = run_coverage(_small_cfg(sigma=0.0))
        for r in report.per_P:
            assert r.mean_radius >= 0 and 0 <= r.coverage <= 1

    def test_reproducible_and_thread_invariant(self):
        a = run_coverage(_small_cfg()).to_csv()
        b = run_coverage(_small_cfg(), threads=3).to_csv()
        assert a == b

    def test_trial_streams_independent_of_trial_count(self):
        # trial t of a 3-trial run equals trial t of a 6-trial run
        from dackrr.simulate import run_trial

        cfg3, cfg6 = _small_cfg(trials=3), _small_cfg(trials=6)
        assert run_trial(cfg3, 4, 2) == run_trial(cfg6, 4, 2)

    def test_csv_and_json(self):
        report = run_coverage(_small_cfg(trials=2))
        rows = list(csv.reader(io.StringIO(report.to_csv())))
        assert tuple(rows[0]) == COLUMNS == (
            "P", "hits", "trials", "coverage", "wilson_lo", "wilson_hi", "mean_radius", "mean_rmse",
        )
        assert len(rows) == 3
        # shortest round-trip floats
        assert float(rows[1][6]) == report.per_P[0].mean_radius
        assert rows[1][6] == repr(report.per_P[0].mean_radius)
        doc = json.loads(report.to_json())
        assert doc["columns"] == list(COLUMNS)
        assert doc["per_P"][1]["mean_rmse"] == report.per_P[1].mean_rmse

    def test_custom_target(self):
        cfg = _small_cfg(target=lambda x: np.cos(3 * x[:, 0]), P_list=(4,), trials=2)
        assert run_coverage(cfg).per_P[0].trials == 2

    def test_rejects_bad_config(self):
        with pytest.raises(ParameterError):
            SimConfig(n=10, P_list=(20,))
        with pytest.raises(ParameterError):
            SimConfig(sigma=-1.0)
        with pytest.raises(ParameterError):
            SimConfig(kernel=KernelSpec.matern(dim=2))


def test_substreams_are_keyed():
    a = rng.substream(1, rng.BOOTSTRAP, 5).random()
    rng.substream(1, rng.BOOTSTRAP, 4).random()
    assert rng.substream(1, rng.BOOTSTRAP, 5).random() == a
    assert rng.derive_seed(1, rng.TRIAL, 2, 3) != rng.derive_seed(1, rng.TRIAL, 3, 2)


def test_report_floats_are_plain():
    report = run_coverage(_small_cfg(trials=2, P_list=(4,)))
    assert "np." not in report.to_csv()
    row = report.per_P[0]
    assert all(type(getattr(row, f)) is float for f in ("coverage", "wilson_lo", "wilson_hi", "mean_radius", "mean_rmse"))
