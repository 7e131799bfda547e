"""Matérn and squared-exponential kernels, Gram matrices and spectral diagnostics.

All kernels are normalized to unit variance, ``k(x, x) = 1``. A Matérn kernel
with smoothness ``alpha`` in ``d`` dimensions has eigenvalues decaying like
``j**(-2s)`` with smoothness index ``s = alpha + d/2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special
from scipy.spatial.distance import cdist

from dackrr.errors import InputError, NumericError, ParameterError

DEFAULT_LENGTHSCALE = 0.2
EIGEN_CLAMP_TOL = 1e-10

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)


class KernelFamily(str, enum.Enum):
    MATERN = "matern"
    SQUARED_EXPONENTIAL = "squared_exponential"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``alpha`` is the Matérn smoothness and is ignored (must be ``None``) for the
    squared-exponential family.
    """

    family: KernelFamily = KernelFamily.MATERN
    alpha: float | None = 2.5
    lengthscale: float = DEFAULT_LENGTHSCALE
    dim: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (self.lengthscale > 0 and math.isfinite(self.lengthscale)):
            raise ParameterError(f"lengthscale must be positive, got {self.lengthscale}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.family is KernelFamily.MATERN:
            if self.alpha is None or not (self.alpha > 0 and math.isfinite(self.alpha)):
                raise ParameterError(f"Matern alpha must be positive, got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.alpha is not None:
            raise ParameterError("squared-exponential kernel takes no alpha")
        object.__setattr__(self, "lengthscale", float(self.lengthscale))

    @classmethod
    def matern(cls, alpha: float = 2.5, lengthscale: float = DEFAULT_LENGTHSCALE, dim: int = 1) -> KernelSpec:
        return cls(KernelFamily.MATERN, alpha, lengthscale, dim)

    @classmethod
    def squared_exponential(cls, lengthscale: float = DEFAULT_LENGTHSCALE, dim: int = 1) -> KernelSpec:
        return cls(KernelFamily.SQUARED_EXPONENTIAL, None, lengthscale, dim)

    @property
    def smoothness_index(self) -> float | None:
        """``(2 alpha + d) / 2`` for Matérn; ``None`` for squared-exponential."""
        if self.family is KernelFamily.MATERN:
            return (2.0 * self.alpha + self.dim) / 2.0
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family.value,
            "alpha": self.alpha,
            "lengthscale": self.lengthscale,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> KernelSpec:
        return cls(KernelFamily(data["family"]), data.get("alpha"), data["lengthscale"], data["dim"])


def as_points(points: ArrayLike, dim: int, name: str = "points") -> NDArray[np.float64]:
    """Coerce ``points`` to a float ``(n, dim)`` array.

    A 1-D array is accepted as ``n`` scalar points when ``dim == 1``.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InputError(f"{name} must have shape (n, {dim}), got {arr.shape}")
    return arr


def _profile(spec: KernelSpec, r: NDArray[np.float64]) -> NDArray[np.float64]:
    """Kernel as a function of scaled distance ``r = |x - y| / lengthscale``."""
    if spec.family is KernelFamily.SQUARED_EXPONENTIAL:
        return np.exp(-0.5 * r * r)
    alpha = spec.alpha
    if alpha == 0.5:
        return np.exp(-r)
    if alpha == 1.5:
        z = _SQRT3 * r
        return (1.0 + z) * np.exp(-z)
    if alpha == 2.5:
        z = _SQRT5 * r
        return (1.0 + z + z * z / 3.0) * np.exp(-z)
    z = math.sqrt(2.0 * alpha) * r
    with np.errstate(invalid="ignore", over="ignore"):
        out = (2.0 ** (1.0 - alpha) / special.gamma(alpha)) * z**alpha * special.kv(alpha, z)
    out = np.where(z == 0.0, 1.0, out)
    # kv underflows to 0 far out; z**alpha * 0 can give nan
    return np.nan_to_num(out, nan=0.0)


def cross_kernel(spec: KernelSpec, a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Matrix ``[k(a_i, b_j)]`` of shape ``(len(a), len(b))``."""
    a = as_points(a, spec.dim, "a")
    b = as_points(b, spec.dim, "b")
    if spec.dim == 1:
        dist = np.abs(a[:, 0, None] - b[None, :, 0])
    else:
        dist = cdist(a, b)
    return _profile(spec, dist / spec.lengthscale)


def kernel_value(spec: KernelSpec, x: ArrayLike, y: ArrayLike) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if x.shape != (spec.dim,) or y.shape != (spec.dim,):
        raise InputError(f"points must have dimension {spec.dim}, got {x.shape} and {y.shape}")
    return float(cross_kernel(spec, x[None, :], y[None, :])[0, 0])


def kernel_matrix(spec: KernelSpec, points: ArrayLike) -> NDArray[np.float64]:
    points = as_points(points, spec.dim)
    if points.shape[0] < 1:
        raise InputError("kernel_matrix needs at least one point")
    return cross_kernel(spec, points, points)


def _check_s(s: float) -> None:
    if not s > 0.5:
        raise ParameterError(f"smoothness index must exceed 1/2, got {s}")


def effective_dimension(s: float, rho: float, rtol: float = 1e-6) -> float:
    """Effective dimensionality ``sum_j mu_j / (mu_j + rho)`` for ``mu_j = j**(-2s)``.

    Terms are summed until the integral-comparison tail bound
    ``J**(1-2s) / (rho (2s-1))`` drops below ``rtol`` times the partial sum.
    For ``s`` near 1/2 that can need an astronomically large ``J``; past
    ``2**26`` terms the remaining tail is replaced by its integral, which
    has a closed hypergeometric form.
    """
    _check_s(s)
    if not 0.0 < rho < 1.0:
        raise ParameterError(f"rho must lie in (0, 1), got {rho}")

    def block(lo: int, hi: int) -> float:
        j = np.arange(lo, hi + 1, dtype=np.float64)
        return float(np.sum(1.0 / (1.0 + rho * j ** (2.0 * s))))

    def tail_bound(J: int) -> float:
        return J ** (1.0 - 2.0 * s) / (rho * (2.0 * s - 1.0))

    cap = 2**26
    J = max(16, math.ceil(rho ** (-1.0 / (2.0 * s))))
    total = block(1, J)
    while tail_bound(J) >= rtol * total and J < cap:
        nxt = min(2 * J, cap)
        for lo in range(J + 1, nxt + 1, 2**22):
            total += block(lo, min(lo + 2**22 - 1, nxt))
        J = nxt
    if tail_bound(J) >= rtol * total:
        # integral of 1/(1 + rho u^(2s)) over [J + 1/2, inf) in closed form
        a, c = J + 0.5, 1.0 - 1.0 / (2.0 * s)
        z = 1.0 / (rho * a ** (2.0 * s))
        total += a ** (1.0 - 2.0 * s) / (rho * (2.0 * s - 1.0)) * special.hyp2f1(1.0, c, 1.0 + c, -z)
    return float(total)


@dataclass(frozen=True)
class EigendecayReport:
    """Nyström eigenvalue estimates with a log-log slope fitted over ``window``.

    ``window`` holds 1-based inclusive eigenvalue indices.
    """

    eigenvalues: NDArray[np.float64]
    fitted_slope: float
    window: tuple[int, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "fitted_slope": self.fitted_slope,
            "window": list(self.window),
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }


def default_window(m: int) -> tuple[int, int]:
    return math.ceil(m**0.25), math.floor(m**0.5)


def nystrom_eigendecay(
    spec: KernelSpec, sample: ArrayLike, window: tuple[int, int] | None = None
) -> EigendecayReport:
    """Estimate the kernel's Mercer eigenvalues from ``m`` design draws.

    The eigenvalues of ``K / m`` approximate the operator eigenvalues with
    respect to the sampling distribution. Tiny negative eigenvalues
    (round-off) are clamped to zero.
    """
    sample = as_points(sample, spec.dim, "sample")
    m = sample.shape[0]
    if m < 32:
        raise ParameterError(f"Nystrom diagnostic needs m >= 32 draws, got {m}")
    lo, hi = window if window is not None else default_window(m)
    if not 1 <= lo < hi <= m:
        raise ParameterError(f"invalid eigenvalue window [{lo}, {hi}] for m={m}")

    try:
        eig = np.linalg.eigvalsh(kernel_matrix(spec, sample) / m)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigen-solver failed: {exc}") from exc
    eig = eig[::-1].copy()
    if eig[-1] < -EIGEN_CLAMP_TOL:
        raise NumericError(f"kernel matrix has eigenvalue {eig[-1]:.3g}, not PSD")
    eig[eig < 0] = 0.0

    j = np.arange(lo, hi + 1)
    vals = eig[j - 1]
    keep = vals > 0
    if keep.sum() < 2:
        raise NumericError("fewer than two positive eigenvalues inside the fit window")
    slope = np.polyfit(np.log(j[keep]), np.log(vals[keep]), 1)[0]
    return EigendecayReport(eigenvalues=eig, fitted_slope=float(slope), window=(lo, hi))
