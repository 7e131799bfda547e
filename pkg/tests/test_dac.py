import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dackrr.dac import (
    FitConfig,
    admissible_partition_range,
    default_rho,
    eval_matrix,
    fit_averaged,
    make_partition,
    undersmoothing_note,
)
from dackrr.errors import ParameterError
from dackrr.kernel import KernelSpec
from dackrr.krr import fit_local, predict

KERNEL = KernelSpec.matern(2.5)


def _data(n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 1))
    return X, np.sin(2 * np.pi * X[:, 0]) + rng.normal(size=n)


class TestPartition:
    def test_even_split(self):
        plan = make_partition(8, 4, seed=1)
        np.testing.assert_array_equal(plan.sizes, [2, 2, 2, 2])

    def test_remainder_goes_first(self):
        np.testing.assert_array_equal(make_partition(10, 4, seed=1).sizes, [3, 3, 2, 2])

    def test_large_even_split(self):
        plan = make_partition(2**17, 2**8, seed=3)
        assert set(plan.sizes.tolist()) == {512}

    def test_too_many_partitions(self):
        with pytest.raises(ParameterError):
            make_partition(3, 4)

    def test_contiguous_mode(self):
        plan = make_partition(7, 3, mode="contiguous")
        np.testing.assert_array_equal(plan.assignment, [0, 0, 0, 1, 1, 2, 2])

    def test_seeded(self):
        a, b = make_partition(100, 7, seed=5), make_partition(100, 7, seed=5)
        np.testing.assert_array_equal(a.assignment, b.assignment)
        assert not np.array_equal(a.assignment, make_partition(100, 7, seed=6).assignment)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 500), st.integers(1, 500), st.integers(0, 2**64 - 1))
    def test_invariants(self, n, P, seed):
        P = min(P, n)
        plan = make_partition(n, P, seed)
        sizes = plan.sizes
        assert sizes.sum() == n and sizes.min() >= 1 and sizes.max() - sizes.min() <= 1
        assert set(np.unique(plan.assignment)) == set(range(P))
        assert np.all(np.diff(sizes) <= 0)


class TestDefaultRho:
    def test_large_n(self):
        # 2^(-102/7), 40-digit mpmath
        assert default_rho(2**17, 3) == pytest.approx(4.1073614277110477659e-05, rel=1e-13)

    def test_n_two(self):
        assert default_rho(2, 3) == pytest.approx(0.55204475683690616882, rel=1e-14)

    @pytest.mark.parametrize("n,s", [(1, 3), (100, 0.5), (100, 0.2)])
    def test_rejects(self, n, s):
        with pytest.raises(ParameterError):
            default_rho(n, s)

    def test_squared_exponential_needs_rho(self):
        X, y = _data(20)
        with pytest.raises(ParameterError):
            fit_averaged(KernelSpec.squared_exponential(), FitConfig(P=2), X, y)
        model = fit_averaged(KernelSpec.squared_exponential(), FitConfig(P=2, rho=1e-3), X, y)
        assert model.rho == 1e-3


class TestAdmissibleRange:
    def test_s0_one_warns(self):
        assert admissible_partition_range(2**17, 1.0, 1.0).warning is not None

    def test_large_s0(self):
        n = 2**17
        r = admissible_partition_range(n, 500.0, 500.0)
        assert r.lower == pytest.approx(1.0, abs=0.03)
        assert r.upper == pytest.approx(n ** (999 / 1001) / math.log(n), rel=1e-12)
        assert r.lower < r.upper and r.warning is None

    def test_formula(self):
        # mpmath: 2^(34/13), 2^(187/13), 2^(85/7) / (17 ln 2)
        r = admissible_partition_range(2**17, 3.0, 6.0)
        assert r.lower == pytest.approx(6.1278654293438954823, rel=1e-13)
        assert r.upper == pytest.approx(383.78663841423755469, rel=1e-13)
        assert 21389.503655277519693 > r.upper

    def test_empty_range_warns(self):
        r = admissible_partition_range(2**10, 0.8, 1.6)
        assert r.lower >= r.upper and "empty" in r.warning


def test_undersmoothing_note():
    assert undersmoothing_note(4.0, 6.0) is not None
    assert undersmoothing_note(6.0, 6.0) is None


class TestFitAveraged:
    def test_single_partition_is_global_fit(self):
        X, y = _data(50)
        model = fit_averaged(KERNEL, FitConfig(P=1), X, y)
        glob = fit_local(KERNEL, default_rho(50, 3.0), X, y)
        grid = np.linspace(0, 1, 33)[:, None]
        np.testing.assert_allclose(model.predict(grid), predict(glob, grid), rtol=1e-12, atol=1e-14)

    def test_zero_response(self):
        X, _ = _data(40)
        model = fit_averaged(KERNEL, FitConfig(P=4), X, np.zeros(40))
        assert np.all(model.predict(np.linspace(0, 1, 9)) == 0.0)

    def test_identical_halves(self):
        X, y = _data(30)
        X2, y2 = np.vstack([X, X]), np.concatenate([y, y])
        model = fit_averaged(KERNEL, FitConfig(P=2, rho=1e-3, partition_mode="contiguous"), X2, y2)
        grid = np.linspace(0, 1, 17)
        np.testing.assert_allclose(model.predict(grid), predict(model.locals[0], grid), rtol=1e-12)

    def test_auto_rho_and_override(self):
        X, y = _data(64)
        assert fit_averaged(KERNEL, FitConfig(P=2), X, y).rho == default_rho(64, 3.0)
        assert fit_averaged(KERNEL, FitConfig(P=2, s_override=2.0), X, y).rho == default_rho(64, 2.0)

    def test_locals_share_kernel_and_rho(self):
        X, y = _data(60)
        model = fit_averaged(KERNEL, FitConfig(P=6), X, y)
        assert len(model.locals) == model.plan.P == 6
        assert all(e.rho == model.rho and e.kernel == KERNEL for e in model.locals)

    def test_deterministic_across_threads(self):
        X, y = _data(200)
        cfg = FitConfig(P=8, seed=42)
        a = fit_averaged(KERNEL, cfg, X, y, threads=1)
        b = fit_averaged(KERNEL, cfg, X, y, threads=4)
        np.testing.assert_array_equal(a.plan.assignment, b.plan.assignment)
        for ea, eb in zip(a.locals, b.locals):
            np.testing.assert_array_equal(ea.coefficients, eb.coefficients)

    def test_p_exceeds_n(self):
        X, y = _data(3)
        with pytest.raises(ParameterError):
            fit_averaged(KERNEL, FitConfig(P=4), X, y)

    def test_partition_errors_are_tagged(self, monkeypatch):
        from dackrr import dac
        from dackrr.errors import NumericError

        def boom(*args):
            raise NumericError("no")

        monkeypatch.setattr(dac, "fit_local", boom)
        X, y = _data(10)
        with pytest.raises(dac.PartitionFitError, match="partition 0"):
            fit_averaged(KERNEL, FitConfig(P=2), X, y)


class TestEvalMatrix:
    def test_single_row(self):
        X, y = _data(30)
        model = fit_averaged(KERNEL, FitConfig(P=1), X, y)
        grid = np.linspace(0, 1, 11)[:, None]
        E = eval_matrix(model, grid)
        assert E.shape == (1, 11)
        np.testing.assert_array_equal(E[0], predict(model.locals[0], grid))

    def test_zero_model(self):
        X, _ = _data(30)
        model = fit_averaged(KERNEL, FitConfig(P=3), X, np.zeros(30))
        assert np.all(eval_matrix(model, np.linspace(0, 1, 5)) == 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_column_means_are_average_of_predictions(self, seed):
        X, y = _data(120, seed)
        model = fit_averaged(KERNEL, FitConfig(P=5, seed=seed), X, y)
        grid = np.random.default_rng(seed + 100).uniform(size=(25, 1))
        direct = sum(predict(e, grid) for e in model.locals) / model.P
        np.testing.assert_allclose(eval_matrix(model, grid).mean(axis=0), direct, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        from dackrr.errors import InputError

        X, y = _data(10)
        model = fit_averaged(KERNEL, FitConfig(P=1), X, y)
        with pytest.raises(InputError):
            eval_matrix(model, np.zeros((3, 2)))
