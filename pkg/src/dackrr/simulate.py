"""Synthetic regression data and the coverage experiment for the bootstrap band.

One trial draws ``n`` points with ``X ~ U[0, 1]`` and ``y = f*(X) + sigma * eps``,
fits the averaged estimator with automatic ``rho``, bootstraps a radius on a
uniform midpoint grid and records whether ``||fbar - f*||_2 <= radius``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray
from scipy import stats

from dackrr import rng
from dackrr.band import BootstrapConfig, Scheme, bootstrap_band, l2_norm_on_grid, uniform_grid
from dackrr.dac import FitConfig, PartitionFitError, eval_matrix, fit_averaged
from dackrr.errors import DackrrError, ParameterError
from dackrr.kernel import KernelSpec

TAU = 2.0 * math.pi

Target = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def sin_tau(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """``sin(tau x)`` with ``tau = 2 pi`` radians per turn."""
    return np.sin(TAU * x)


@dataclass(frozen=True)
class SimConfig:
    n: int = 2**13
    P_list: tuple[int, ...] = (2**5, 2**7)
    sigma: float = 1.0
    beta: float = 0.95
    B: int = 1000
    trials: int = 200
    kernel: KernelSpec = field(default_factory=KernelSpec)
    seed: int = 0
    target: Literal["sin"] | Target = "sin"
    noise: Literal["gaussian", "rademacher"] = "gaussian"
    grid_size: int = 1024
    scheme: Scheme = Scheme.RESAMPLE

    def __post_init__(self) -> None:
        object.__setattr__(self, "P_list", tuple(int(p) for p in self.P_list))
        if self.sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {self.sigma}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if self.noise not in ("gaussian", "rademacher"):
            raise ParameterError(f"unknown noise model {self.noise!r}")
        if self.target == "sin" and self.kernel.dim != 1:
            raise ParameterError("the sin target is defined on [0, 1]; kernel.dim must be 1")
        for P in self.P_list:
            if not 1 <= P <= self.n:
                raise ParameterError(f"partition count {P} not in [1, n={self.n}]")

    def target_fn(self) -> Target:
        if self.target == "sin":
            return lambda x: sin_tau(x[:, 0])
        return self.target


def simulate_data(cfg: SimConfig, trial_seed: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Uniform design on ``[0, 1]**d`` and noisy responses."""
    gen = rng.substream(trial_seed, rng.DATA)
    X = gen.uniform(0.0, 1.0, size=(cfg.n, cfg.kernel.dim))
    if cfg.noise == "gaussian":
        eps = gen.standard_normal(cfg.n)
    else:
        eps = gen.choice(np.array([-1.0, 1.0]), size=cfg.n)
    y = cfg.target_fn()(X) + cfg.sigma * eps
    return X, y


def wilson_interval(hits: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clipped to [0, 1]."""
    if trials < 1 or not 0 <= hits <= trials:
        raise ParameterError(f"need 0 <= hits <= trials and trials >= 1, got {hits}/{trials}")
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    p = hits / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # exact boundaries (p = 0 or 1) suffer rounding in centre +- half
    if hits == 0:
        lo = 0.0
    if hits == trials:
        hi = 1.0
    return lo, hi


@dataclass(frozen=True)
class CoverageRow:
    P: int
    hits: int
    trials: int
    coverage: float
    wilson_lo: float
    wilson_hi: float
    mean_radius: float
    mean_rmse: float


COLUMNS = tuple(CoverageRow.__dataclass_fields__)


@dataclass(frozen=True)
class CoverageReport:
    per_P: list[CoverageRow]

    def row(self, P: int) -> CoverageRow:
        for r in self.per_P:
            if r.P == P:
                return r
        raise KeyError(P)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.per_P:
            writer.writerow([repr(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"columns": list(COLUMNS), "per_P": [asdict(r) for r in self.per_P]}, indent=2) + "\n"


@dataclass(frozen=True)
class TrialOutcome:
    hit: bool
    radius: float
    rmse: float


def run_trial(cfg: SimConfig, P: int, t: int) -> TrialOutcome:
    trial_root = rng.derive_seed(cfg.seed, rng.TRIAL, P, t)
    X, y = simulate_data(cfg, trial_root)
    fit_cfg = FitConfig(P=P, seed=trial_root)
    model = fit_averaged(cfg.kernel, fit_cfg, X, y)
    grid = uniform_grid(cfg.kernel.dim, cfg.grid_size)
    evals = eval_matrix(model, grid.points)
    band = bootstrap_band(evals, grid, BootstrapConfig(cfg.B, cfg.beta, cfg.scheme, trial_root))
    truth = cfg.target_fn()(grid.points)
    rmse = l2_norm_on_grid(evals.mean(axis=0) - truth, grid)
    return TrialOutcome(hit=rmse <= band.radius, radius=band.radius, rmse=rmse)


def run_coverage(cfg: SimConfig, threads: int = 1) -> CoverageReport:
    """Empirical coverage of the bootstrap band for every ``P`` in ``cfg.P_list``.

    Trial ``t`` at partition count ``P`` is seeded from ``(seed, TRIAL, P, t)``,
    so results do not depend on ``threads``.
    """

    def one(job: tuple[int, int]) -> TrialOutcome:
        P, t = job
        try:
            return run_trial(cfg, P, t)
        except PartitionFitError as exc:
            raise DackrrError(f"P={P}, trial={t}: {exc}") from exc

    rows = []
    for P in cfg.P_list:
        jobs = [(P, t) for t in range(cfg.trials)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(one, jobs))
        else:
            outcomes = [one(j) for j in jobs]
        hits = sum(o.hit for o in outcomes)
        lo, hi = wilson_interval(hits, cfg.trials)
        rows.append(
            CoverageRow(
                P=P,
                hits=hits,
                trials=cfg.trials,
                coverage=hits / cfg.trials,
                wilson_lo=lo,
                wilson_hi=hi,
                mean_radius=math.fsum(o.radius for o in outcomes) / cfg.trials,
                mean_rmse=math.fsum(o.rmse for o in outcomes) / cfg.trials,
            )
        )
    return CoverageReport(per_P=rows)
