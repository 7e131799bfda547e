"""Divide-and-conquer KRR: partitioning, local fits, averaging and parameter rules."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dackrr import rng
from dackrr.errors import DackrrError, InputError, ParameterError
from dackrr.kernel import KernelFamily, KernelSpec, as_points
from dackrr.krr import LocalEstimate, fit_local, predict

PartitionMode = Literal["random", "contiguous"]


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    n: int
    P: int
    assignment: NDArray[np.int64]

    @property
    def sizes(self) -> NDArray[np.int64]:
        return np.bincount(self.assignment, minlength=self.P)

    def indices(self, p: int) -> NDArray[np.int64]:
        """Row indices of block ``p`` in ascending order."""
        return np.flatnonzero(self.assignment == p)


def make_partition(n: int, P: int, seed: int = 0, mode: PartitionMode = "random") -> PartitionPlan:
    """Split ``range(n)`` into ``P`` blocks whose sizes differ by at most one.

    Rows are permuted with the seeded ``PARTITION`` substream (or left in order
    for ``mode="contiguous"``) and dealt into contiguous blocks; the first
    ``n % P`` blocks receive one extra row.
    """
    if P < 1 or n < 1:
        raise ParameterError(f"need n >= 1 and P >= 1, got n={n}, P={P}")
    if P > n:
        raise ParameterError(f"partition count P={P} exceeds sample size n={n}")
    if mode == "random":
        order = rng.substream(seed, rng.PARTITION).permutation(n)
    elif mode == "contiguous":
        order = np.arange(n)
    else:
        raise ParameterError(f"unknown partition mode {mode!r}")
    base, extra = divmod(n, P)
    sizes = np.full(P, base, dtype=np.int64)
    sizes[:extra] += 1
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.repeat(np.arange(P, dtype=np.int64), sizes)
    return PartitionPlan(n=n, P=P, assignment=assignment)


def default_rho(n: int, s: float) -> float:
    """Rate-optimal regularization ``n ** (-2s / (2s + 1))``."""
    if n < 2:
        raise ParameterError(f"need n >= 2, got {n}")
    if not s > 0.5:
        raise ParameterError(f"smoothness index must exceed 1/2, got {s}")
    return float(n ** (-2.0 * s / (2.0 * s + 1.0)))


@dataclass(frozen=True)
class PartitionRange:
    lower: float
    upper: float
    warning: str | None


def admissible_partition_range(n: int, s: float, s0: float) -> PartitionRange:
    """Exponent-level guideline for the partition count.

    Valid bands need ``n**(2/(2 s0+1)) << P`` while the averaged estimator stays
    rate-optimal for ``P <~ n**((2s-1)/(2s+1)) / log n`` (and
    ``P << n**((2 s0-1)/(2 s0+1))``). Unknown constants make this advisory only.
    """
    lower = n ** (2.0 / (2.0 * s0 + 1.0))
    upper = min(
        n ** ((2.0 * s0 - 1.0) / (2.0 * s0 + 1.0)),
        n ** ((2.0 * s - 1.0) / (2.0 * s + 1.0)) / math.log(n),
    )
    warnings = []
    if s0 <= 1.5:
        warnings.append(f"truth smoothness s0={s0:g} <= 3/2: no partition count yields both optimal rate and valid bands")
    if lower >= upper:
        warnings.append(f"admissible partition range is empty: lower {lower:.6g} >= upper {upper:.6g}")
    return PartitionRange(lower=lower, upper=upper, warning="; ".join(warnings) or None)


def undersmoothing_note(s: float, s0: float, tol: float = 0.05) -> str | None:
    """Advisory text when ``s`` sits at the ``(2/3) s0`` undersmoothing limit."""
    target = 2.0 * s0 / 3.0
    if abs(s - target) > tol * s0:
        return None
    rate = s0 / (2.0 * s0 + 1.5)
    return (
        f"s={s:g} is about (2/3)*s0={target:g}: the largest reasonable undersmoothing; "
        f"expected error rate n^-{rate:.4g} instead of the minimax n^-{s0 / (2.0 * s0 + 1.0):.4g}"
    )


@dataclass(frozen=True)
class FitConfig:
    rho: float | None = None
    P: int = 1
    seed: int = 0
    s_override: float | None = None
    partition_mode: PartitionMode = "random"

    def __post_init__(self) -> None:
        if self.P < 1:
            raise ParameterError(f"P must be >= 1, got {self.P}")
        if self.rho is not None and not self.rho > 0:
            raise ParameterError(f"rho must be positive, got {self.rho}")
        if self.s_override is not None and not self.s_override > 0.5:
            raise ParameterError(f"s_override must exceed 1/2, got {self.s_override}")


class PartitionFitError(DackrrError):
    def __init__(self, partition: int, cause: Exception):
        self.partition = partition
        super().__init__(f"partition {partition}: {cause}")


@dataclass(frozen=True, eq=False)
class AveragedModel:
    locals: list[LocalEstimate]
    rho: float
    kernel: KernelSpec
    plan: PartitionPlan

    @property
    def P(self) -> int:
        return len(self.locals)

    def predict(self, query: ArrayLike) -> NDArray[np.float64]:
        return eval_matrix(self, query).mean(axis=0)


def resolve_rho(kernel: KernelSpec, cfg: FitConfig, n: int) -> float:
    if cfg.rho is not None:
        return float(cfg.rho)
    s = cfg.s_override if cfg.s_override is not None else kernel.smoothness_index
    if s is None:
        raise ParameterError("squared-exponential kernel requires an explicit rho")
    return default_rho(n, s)


def _map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fit_averaged(
    kernel: KernelSpec, cfg: FitConfig, X: ArrayLike, y: ArrayLike, threads: int = 1
) -> AveragedModel:
    """Fit one KRR per partition and wrap them as the averaged estimator.

    Partition fits are pure and independent; ``threads`` only changes how they
    are scheduled, never the result.
    """
    X = as_points(X, kernel.dim, "X")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if y.shape[0] != n:
        raise InputError(f"X has {n} rows but y has {y.shape[0]} entries")
    if n < cfg.P:
        raise ParameterError(f"partition count P={cfg.P} exceeds sample size n={n}")
    if kernel.family is KernelFamily.SQUARED_EXPONENTIAL and cfg.rho is None:
        raise ParameterError("squared-exponential kernel requires an explicit rho")
    rho = resolve_rho(kernel, cfg, n)
    plan = make_partition(n, cfg.P, cfg.seed, cfg.partition_mode)

    def fit_one(p: int) -> LocalEstimate:
        idx = plan.indices(p)
        try:
            return fit_local(kernel, rho, X[idx], y[idx])
        except DackrrError as exc:
            raise PartitionFitError(p, exc) from exc

    locals_ = _map(fit_one, list(range(cfg.P)), threads)
    return AveragedModel(locals=locals_, rho=rho, kernel=kernel, plan=plan)


def eval_matrix(model: AveragedModel, grid: ArrayLike, threads: int = 1) -> NDArray[np.float64]:
    """``P x M`` matrix whose row ``p`` is local estimate ``p`` on the grid."""
    points = as_points(getattr(grid, "points", grid), model.kernel.dim, "grid")
    if points.shape[0] < 1:
        raise InputError("grid must be nonempty")
    rows = _map(lambda est: predict(est, points), model.locals, threads)
    return np.vstack(rows)
