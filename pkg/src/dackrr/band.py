"""L2 norms on quadrature grids and the bootstrap confidence radius.

The bootstrap never refits. It works on the ``P x M`` matrix of local
estimates evaluated on the grid and reweights its rows:

* ``resample`` draws ``P`` rows with replacement and averages them;
* ``multiplier`` averages ``u_p * row_p`` with ``u_p ~ Normal(1, 1)``.

Iteration ``b`` draws from its own substream ``(seed, BOOTSTRAP, b)``.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dackrr import rng
from dackrr.errors import InputError, ParameterError

_CHUNK = 256


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and probability weights discretizing the design measure."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.points.ndim != 2 or self.weights.ndim != 1 or self.points.shape[0] != self.weights.shape[0]:
            raise InputError(f"grid points {self.points.shape} and weights {self.weights.shape} disagree")
        if np.any(self.weights < 0) or abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ParameterError("grid weights must be nonnegative and sum to one")

    @property
    def size(self) -> int:
        return self.points.shape[0]


def uniform_grid(d: int, M: int, box: tuple[float, float] = (0.0, 1.0)) -> QuadratureGrid:
    """Composite midpoint rule on ``[lo, hi]**d`` with ``M`` nodes per axis."""
    lo, hi = box
    if d not in (1, 2, 3):
        raise ParameterError(f"uniform grid supports d in {{1, 2, 3}}, got {d}")
    if M < 2:
        raise ParameterError(f"need M >= 2 nodes per axis, got {M}")
    if not lo < hi:
        raise ParameterError(f"empty box [{lo}, {hi}]")
    axis = lo + (hi - lo) * (np.arange(M) + 0.5) / M
    points = np.array(list(itertools.product(axis, repeat=d)), dtype=np.float64).reshape(-1, d)
    weights = np.full(points.shape[0], 1.0 / points.shape[0])
    return QuadratureGrid(points, weights)


def empirical_grid(sample: ArrayLike) -> QuadratureGrid:
    """Empirical measure of ``sample``; repeated points carry repeated mass."""
    points = np.asarray(sample, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or points.shape[0] < 1:
        raise InputError(f"sample must be a nonempty (M, d) array, got {points.shape}")
    return QuadratureGrid(points, np.full(points.shape[0], 1.0 / points.shape[0]))


def l2_norm_on_grid(values: ArrayLike, grid: QuadratureGrid) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.size,):
        raise InputError(f"expected {grid.size} values, got shape {values.shape}")
    return float(np.sqrt(np.dot(grid.weights, values * values)))


class Scheme(str, enum.Enum):
    RESAMPLE = "resample"
    MULTIPLIER = "multiplier"


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    beta: float = 0.95
    scheme: Scheme = Scheme.RESAMPLE
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.B < 1:
            raise ParameterError(f"B must be >= 1, got {self.B}")
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")


def quantile_rank(beta: float, B: int) -> int:
    """1-based rank ``ceil(beta * B)``, robust to ``beta * B`` landing a hair above an integer."""
    return min(B, max(1, math.ceil(beta * B - 1e-9)))


@dataclass(frozen=True, eq=False)
class BandResult:
    radius: float
    norms: NDArray[np.float64]
    config: BootstrapConfig

    def radius_at(self, beta: float) -> float:
        return float(self.norms[quantile_rank(beta, len(self.norms)) - 1])

    def to_dict(self) -> dict[str, Any]:
        return {
            "radius": self.radius,
            "beta": self.config.beta,
            "B": self.config.B,
            "scheme": self.config.scheme.value,
        }


def _weights(scheme: Scheme, P: int, seed: int, b: int) -> NDArray[np.float64]:
    """Row coefficients ``w`` with ``f^b - fbar = sum_p w_p * row_p``."""
    gen = rng.substream(seed, rng.BOOTSTRAP, b)
    if scheme is Scheme.RESAMPLE:
        counts = np.bincount(gen.integers(0, P, size=P), minlength=P)
        return (counts - 1.0) / P
    return (gen.normal(1.0, 1.0, size=P) - 1.0) / P


def bootstrap_band(
    evals: ArrayLike, grid: QuadratureGrid, cfg: BootstrapConfig, threads: int = 1
) -> BandResult:
    """Bootstrap radius ``r`` with ``P^b{ ||f^b - fbar||_2 <= r } = beta``.

    The radius is the ``ceil(beta B)``-th smallest bootstrap norm.
    """
    evals = np.asarray(evals, dtype=np.float64)
    if evals.ndim != 2 or evals.shape[0] < 1:
        raise InputError(f"evals must be a (P, M) matrix with P >= 1, got {evals.shape}")
    if evals.shape[1] != grid.size:
        raise InputError(f"evals has {evals.shape[1]} columns but grid has {grid.size} points")
    P = evals.shape[0]

    if cfg.scheme is Scheme.RESAMPLE:
        # resample weights sum to zero, so rows may be shifted by a reference row;
        # identical rows then give exactly zero deviations
        rows = evals - evals[0]
    else:
        rows = evals

    def chunk(start: int) -> NDArray[np.float64]:
        stop = min(start + _CHUNK, cfg.B)
        W = np.stack([_weights(cfg.scheme, P, cfg.seed, b) for b in range(start, stop)])
        dev = W @ rows
        return np.sqrt((dev * dev) @ grid.weights)

    starts = list(range(0, cfg.B, _CHUNK))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]
    norms = np.sort(np.concatenate(parts))
    radius = float(norms[quantile_rank(cfg.beta, cfg.B) - 1])
    return BandResult(radius=radius, norms=norms, config=cfg)


def covers(model, truth_values: ArrayLike, grid: QuadratureGrid, band: BandResult) -> bool:
    """Whether ``||fbar - f*||_2 <= radius`` on ``grid``."""
    truth_values = np.asarray(truth_values, dtype=np.float64)
    if truth_values.shape != (grid.size,):
        raise InputError(f"expected {grid.size} truth values, got shape {truth_values.shape}")
    return l2_norm_on_grid(model.predict(grid.points) - truth_values, grid) <= band.radius
