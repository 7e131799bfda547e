"""Exact kernel ridge regression on a single partition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from dackrr.errors import InputError, NumericError, ParameterError
from dackrr.kernel import KernelSpec, as_points, cross_kernel, kernel_matrix

JITTER_START = 1e-12
JITTER_MAX = 1e-6


@dataclass(frozen=True, eq=False)
class LocalEstimate:
    """A fitted KRR function ``x -> sum_i coefficients[i] * k(x, anchors[i])``."""

    anchors: NDArray[np.float64]
    coefficients: NDArray[np.float64]
    kernel: KernelSpec
    rho: float

    def __post_init__(self) -> None:
        self.anchors.setflags(write=False)
        self.coefficients.setflags(write=False)

    @property
    def size(self) -> int:
        return self.anchors.shape[0]

    def residual(self, y: ArrayLike) -> float:
        """``||(K + S rho I) c - y||`` for the training targets ``y``."""
        y = np.asarray(y, dtype=np.float64)
        system = kernel_matrix(self.kernel, self.anchors)
        system[np.diag_indices_from(system)] += self.size * self.rho
        return float(np.linalg.norm(system @ self.coefficients - y))


def _cholesky_solve(system: NDArray[np.float64], y: NDArray[np.float64], scale: float) -> NDArray[np.float64]:
    try:
        return linalg.cho_solve(linalg.cho_factor(system, lower=True), y)
    except linalg.LinAlgError:
        pass
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        shifted = system.copy()
        shifted[np.diag_indices_from(shifted)] += jitter * scale
        try:
            return linalg.cho_solve(linalg.cho_factor(shifted, lower=True), y)
        except linalg.LinAlgError:
            jitter *= 10.0
    raise NumericError(f"Cholesky failed even with jitter {jitter / 10.0 * scale:.3g}")


def fit_local(kernel: KernelSpec, rho: float, X: ArrayLike, y: ArrayLike) -> LocalEstimate:
    """Solve ``(K + S rho I) c = y`` for one partition of size ``S``.

    This is the stationarity condition of the penalized objective
    ``-(1/2S) sum (y_i - f(X_i))^2 - (rho/2) ||f||_H^2``.
    """
    if not (rho > 0 and np.isfinite(rho)):
        raise ParameterError(f"rho must be positive, got {rho}")
    X = as_points(X, kernel.dim, "X")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    S = X.shape[0]
    if S < 1:
        raise InputError("cannot fit an empty partition")
    if y.shape[0] != S:
        raise InputError(f"X has {S} rows but y has {y.shape[0]} entries")

    system = kernel_matrix(kernel, X)
    scale = np.trace(system) / S
    system[np.diag_indices_from(system)] += S * rho
    coef = _cholesky_solve(system, y, scale)
    return LocalEstimate(anchors=X.copy(), coefficients=np.asarray(coef, dtype=np.float64), kernel=kernel, rho=float(rho))


def predict(est: LocalEstimate, query: ArrayLike) -> NDArray[np.float64]:
    query = as_points(query, est.kernel.dim, "query")
    return cross_kernel(est.kernel, query, est.anchors) @ est.coefficients
