"""Proximity operators, projections and the concrete operator blocks.

The blocks act on product points ``(x, u, v)``:

* smooth gradient ``(A^T(Ax - z), 0, 0)``
* skew coupling ``(M^T u, -M x, 0)``
* saddle operator ``(sum_i v_i grad e_i(x), 0, -e(x))`` for the separable
  entropic constraints ``e_i(x) = x_i (ln(x_i / a_i) - 1) - r_i``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, ProblemError
from .linalg import ProductPoint, as_vector, matvec, matvec_adjoint

# below this an entry counts as the boundary of dom e, where grad e is undefined
DOMAIN_FLOOR = 1e-300


@dataclass(frozen=True)
class BoxSet:
    """Componentwise interval ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise DimensionError("box bounds differ in length")
        if np.any(lo > hi):
            raise ProblemError("box has lower > upper in some component")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def size(self) -> int:
        return self.lower.size

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class EntropicConstraints:
    """Parameters of ``e_i(x) = x_i (ln(x_i/a_i) - 1) - r_i``.

    Requires ``a_i > 0`` and ``-a_i < r_i < 0`` so each ``e_i`` has two
    roots and a strictly negative minimum at ``x_i = a_i``.
    """

    a: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = as_vector(self.a, "a")
        r = as_vector(self.r, "r")
        if a.shape != r.shape:
            raise DimensionError("a and r differ in length")
        if np.any(a <= 0):
            raise ProblemError("entropic scales a_i must be positive")
        if np.any(r <= -a) or np.any(r >= 0):
            raise ProblemError("entropic levels must satisfy -a_i < r_i < 0")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "r", r)

    @property
    def size(self) -> int:
        return self.a.size


def _check_same(x, ref, what):
    if x.shape != ref.shape:
        raise DimensionError(f"{what}: shape {x.shape} does not match {ref.shape}")


def project_box(x: np.ndarray, box: BoxSet) -> np.ndarray:
    _check_same(x, box.lower, "project_box")
    return np.minimum(np.maximum(x, box.lower), box.upper)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


def clamp(u: np.ndarray, bound: float) -> np.ndarray:
    """Projection onto ``[-bound, bound]^q``."""
    return np.clip(u, -bound, bound)


def prox_scaled_l1(x: np.ndarray, gamma: float, alpha: float) -> np.ndarray:
    """Soft thresholding, the prox of ``gamma * alpha * ||.||_1``."""
    if gamma <= 0 or alpha < 0:
        raise ValueError("need gamma > 0 and alpha >= 0")
    t = gamma * alpha
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox_conjugate(prox_f: Callable[[np.ndarray, float], np.ndarray],
                   gamma: float, x: np.ndarray) -> np.ndarray:
    """``prox_{gamma f*}(x)`` through the Moreau decomposition.

    `prox_f(y, t)` must return ``prox_{t f}(y)``. Only the prox of ``f``
    is used: ``prox_{gamma f*}(x) = x - gamma prox_{f/gamma}(x / gamma)``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return x - gamma * prox_f(x / gamma, 1.0 / gamma)


def eval_e(x: np.ndarray, c: EntropicConstraints,
           counter: Optional[Counter] = None) -> np.ndarray:
    """Constraint values ``e_i(x_i)``; ``e_i(0) = -r_i``."""
    _check_same(x, c.a, "eval_e")
    if np.any(x < 0):
        bad = int(np.flatnonzero(x < 0)[0])
        raise DomainError(f"eval_e: x[{bad}] = {x[bad]!r} is negative")
    if counter is not None:
        counter["e_eval"] += 1
    pos = x > 0
    if pos.all():
        return x * (np.log(x / c.a) - 1.0) - c.r
    out = -c.r.copy()
    xp = x[pos]
    out[pos] = xp * (np.log(xp / c.a[pos]) - 1.0) - c.r[pos]
    return out


def grad_e(x: np.ndarray, c: EntropicConstraints, paper_literal: bool = False,
           counter: Optional[Counter] = None) -> np.ndarray:
    """Diagonal of the Jacobian of ``e``: ``ln(x_i / a_i)``.

    With ``paper_literal=True`` returns ``ln(x_i)`` instead, which only
    agrees with the true derivative when ``a_i = 1``.
    """
    _check_same(x, c.a, "grad_e")
    if np.any(x <= DOMAIN_FLOOR):
        bad = int(np.flatnonzero(x <= DOMAIN_FLOOR)[0])
        raise DomainError(f"grad_e: x[{bad}] = {x[bad]!r} is not in the interior of the domain")
    if counter is not None:
        counter["grad_e_eval"] += 1
    if paper_literal:
        return np.log(x)
    return np.log(x / c.a)


@dataclass(frozen=True)
class SaddleOperator:
    """The saddle operator of the constraint Lagrangian ``v . e(x)``."""

    constraints: EntropicConstraints
    q: int
    paper_literal_grad: bool = False

    def __call__(self, z: ProductPoint, counter: Optional[Counter] = None) -> ProductPoint:
        return apply_saddle(z, self, counter)


def apply_saddle(z: ProductPoint, op: SaddleOperator,
                 counter: Optional[Counter] = None) -> ProductPoint:
    c = op.constraints
    if z.x.shape != c.a.shape or z.v.shape != c.a.shape or z.u.shape != (op.q,):
        raise DimensionError(f"saddle operator expects dims {(c.size, op.q, c.size)}, got {z.dims}")
    if np.any(z.v < 0):
        raise DomainError("saddle operator: multiplier block v has negative entries")
    if np.any(z.x <= DOMAIN_FLOOR):
        raise DomainError("saddle operator: primal block x is not strictly positive")
    w = z.v * grad_e(z.x, c, op.paper_literal_grad, counter)
    return ProductPoint(w, np.zeros(op.q), -eval_e(z.x, c, counter))


def apply_skew(z: ProductPoint, M: np.ndarray,
               counter: Optional[Counter] = None) -> ProductPoint:
    """``(M^T u, -M x, 0)``; skew-adjoint and ``||M||``-Lipschitz."""
    if counter is not None:
        counter["matvec_Mt"] += 1
        counter["matvec_M"] += 1
    return ProductPoint(matvec_adjoint(M, z.u), -matvec(M, z.x), np.zeros_like(z.v))


def apply_smooth_grad(z: ProductPoint, A: np.ndarray, zdata: np.ndarray,
                      counter: Optional[Counter] = None) -> ProductPoint:
    """``(grad h(x), 0, 0)`` for ``h = ||A x - zdata||^2 / 2``."""
    if zdata.shape != (A.shape[0],):
        raise DimensionError("data vector does not match rows of A")
    if counter is not None:
        counter["matvec_A"] += 1
        counter["matvec_At"] += 1
    g = matvec_adjoint(A, matvec(A, z.x) - zdata)
    return ProductPoint(g, np.zeros_like(z.u), np.zeros_like(z.v))


def resolvent_block(z: ProductPoint, gamma: float, box: BoxSet, alpha: float) -> ProductPoint:
    """Resolvent of ``N_C x d(alpha ||.||_1)^* x N_{v >= 0}``.

    Every factor is an indicator, so the result is a projection and does
    not depend on `gamma`.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if z.v.shape != box.lower.shape:
        raise DimensionError("multiplier block does not match box dimension")
    return ProductPoint(project_box(z.x, box), clamp(z.u, alpha), project_nonneg(z.v))
