"""Dense linear algebra helpers and spectral-norm estimation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError

logger = logging.getLogger(__name__)

__all__ = [
    "ProductPoint",
    "as_vector",
    "as_matrix",
    "matvec",
    "matvec_adjoint",
    "power_iteration",
    "operator_norm",
]


def as_vector(x, name="x") -> np.ndarray:
    """Return `x` as a finite 1-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_matrix(M, name="M") -> np.ndarray:
    """Return `M` as a finite 2-D float64 array with positive dimensions."""
    arr = np.asarray(M, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def matvec(M: np.ndarray, x: np.ndarray) -> np.ndarray:
    if x.shape != (M.shape[1],):
        raise DimensionError(f"cannot apply {M.shape} matrix to vector of shape {x.shape}")
    return M @ x


def matvec_adjoint(M: np.ndarray, y: np.ndarray) -> np.ndarray:
    if y.shape != (M.shape[0],):
        raise DimensionError(f"cannot apply adjoint of {M.shape} matrix to vector of shape {y.shape}")
    return M.T @ y


class PowerResult(NamedTuple):
    norm: float
    iterations: int
    converged: bool


def power_iteration(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10000) -> PowerResult:
    """Largest singular value of `M` by power iteration on ``M^T M``.

    Starts from the normalized all-ones vector so the estimate is
    reproducible. Stops when the relative change between successive
    Rayleigh estimates drops to `tol`. If the iteration cap is hit the
    estimate is inflated by 1% since callers use it to bound step sizes,
    where overestimating is safe.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    M = np.asarray(M, dtype=np.float64)
    if not np.any(M):
        return PowerResult(0.0, 0, True)

    n = M.shape[1]
    x = np.ones(n) / np.sqrt(n)
    if np.linalg.norm(M @ x) == 0.0:
        # all-ones is in the kernel; fall back to a ramp, which is not
        x = np.arange(1.0, n + 1.0)
        x /= np.linalg.norm(x)

    lam = 0.0
    for k in range(1, max_iter + 1):
        y = M.T @ (M @ x)
        lam_new = float(x @ y)  # Rayleigh quotient, x has unit norm
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return PowerResult(0.0, k, True)
        x = y / ny
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return PowerResult(float(np.sqrt(lam_new)), k, True)
        lam = lam_new

    logger.warning("power iteration hit max_iter=%d; inflating estimate by 1%%", max_iter)
    return PowerResult(1.01 * float(np.sqrt(lam)), max_iter, False)


def operator_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Spectral norm estimate of `M` (see `power_iteration`)."""
    return power_iteration(M, tol, max_iter).norm


@dataclass(frozen=True)
class ProductPoint:
    """An element ``(x, u, v)`` of the primal / dual / multiplier space.

    Solvers work on the flat concatenation; this class packs and splits it.
    """

    x: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.x.size, self.u.size, self.v.size)

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.u, self.v])

    @classmethod
    def from_flat(cls, z: np.ndarray, dims: tuple[int, int, int]) -> "ProductPoint":
        n, q, p = dims
        if z.shape != (n + q + p,):
            raise DimensionError(f"flat point of shape {z.shape} does not match dims {dims}")
        return cls(z[:n], z[n:n + q], z[n + q:])

    def norm(self) -> float:
        return float(np.sqrt(self.x @ self.x + self.u @ self.u + self.v @ self.v))
