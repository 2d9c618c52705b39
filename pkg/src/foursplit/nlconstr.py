"""Entropy-constrained composite least squares as a monotone inclusion.

Problem::

    minimize    alpha ||M x||_1 + ||A x - zdata||^2 / 2
    subject to  lower <= x <= upper
                x_i (ln(x_i / a_i) - 1) - r_i <= 0   for every i

Its optimality system is an inclusion on ``(x, u, v)`` (primal, dual of
the l1 term, constraint multipliers) with

* ``A``  = ``N_C x d g* x N_{v >= 0}`` (a projection onto ``X``),
* ``B1`` = ``(A^T(Ax - z), 0, 0)``, cocoercive with ``beta = 1/||A||^2``,
* ``B2`` = ``(M^T u, -M x, 0)``, ``||M||``-Lipschitz,
* ``B3`` = ``(v * grad e(x), 0, -e(x))``, continuous on ``x > 0, v >= 0``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError, ProblemError
from .linalg import ProductPoint, as_matrix, as_vector, operator_norm
from .operators import (
    DOMAIN_FLOOR,
    BoxSet,
    EntropicConstraints,
    SaddleOperator,
    apply_saddle,
    apply_skew,
    apply_smooth_grad,
    clamp,
    eval_e,
    grad_e,
    project_box,
    project_nonneg,
    prox_scaled_l1,
    resolvent_block,
)
from .splitting import OperatorBundle, SolverConfig

__all__ = [
    "NlcProblem",
    "KktReport",
    "build_bundle",
    "phi_maps",
    "alg1_defaults",
    "compute_bounds",
    "objective",
    "kkt_report",
    "initial_point",
]


@dataclass(frozen=True)
class NlcProblem:
    A: np.ndarray
    zdata: np.ndarray
    M: np.ndarray
    alpha: float
    box: BoxSet
    constraints: EntropicConstraints
    seed: Optional[int] = None

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        M = as_matrix(self.M, "M")
        zdata = as_vector(self.zdata, "zdata")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "zdata", zdata)
        n = A.shape[1]
        if zdata.shape != (A.shape[0],):
            raise DimensionError("zdata length must equal the number of rows of A")
        if M.shape[1] != n:
            raise DimensionError("M and A must have the same number of columns")
        if self.box.size != n or self.constraints.size != n:
            raise DimensionError("box and constraints must have one entry per column of A")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ProblemError("alpha must be finite and nonnegative")
        if np.any(self.box.lower <= 0):
            raise ProblemError("box must lie in x > 0, the interior of the constraint domain")
        # Slater: a box point with every constraint strictly negative
        probe = project_box(self.constraints.a, self.box)
        if np.any(eval_e(probe, self.constraints) >= 0):
            raise ProblemError("no strictly feasible point found (probe at a, clipped to the box)")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.M.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n, self.q, self.n)

    def to_dict(self) -> dict:
        d = {
            "n": self.n, "m": self.m, "q": self.q,
            "alpha": float(self.alpha),
            "a": self.constraints.a.tolist(),
            "r": self.constraints.r.tolist(),
            "A": self.A.ravel().tolist(),
            "M": self.M.ravel().tolist(),
            "zdata": self.zdata.tolist(),
            "y0": self.box.lower.tolist(),
            "y1": self.box.upper.tolist(),
        }
        if self.seed is not None:
            d["seed"] = int(self.seed)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "NlcProblem":
        try:
            n, m, q = int(d["n"]), int(d["m"]), int(d["q"])
            A = np.asarray(d["A"], dtype=np.float64)
            M = np.asarray(d["M"], dtype=np.float64)
            if A.size != m * n or M.size != q * n:
                raise DimensionError("matrix entry count does not match declared dimensions")
            return cls(
                A=A.reshape(m, n), zdata=d["zdata"], M=M.reshape(q, n),
                alpha=float(d["alpha"]),
                box=BoxSet(d["y0"], d["y1"]),
                constraints=EntropicConstraints(d["a"], d["r"]),
                seed=d.get("seed"),
            )
        except KeyError as exc:
            raise ProblemError(f"problem JSON missing field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "NlcProblem":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    primal_feas: float
    dual_feas: float
    complementarity: float
    objective: float
    floored: bool = False

    def max_residual(self) -> float:
        return max(self.stationarity, self.primal_feas, self.dual_feas, self.complementarity)


def build_bundle(prob: NlcProblem, counter: Optional[Counter] = None,
                 paper_literal_grad: bool = False,
                 norm_A: Optional[float] = None, norm_M: Optional[float] = None):
    """Assemble the product-space operators of `prob`.

    Returns ``(bundle, beta, lip)``. Pass a `Counter` to tally matrix
    products and constraint evaluations.
    """
    nA = operator_norm(prob.A) if norm_A is None else norm_A
    nM = operator_norm(prob.M) if norm_M is None else norm_M
    beta = math.inf if nA == 0 else 1.0 / nA**2
    lip = float(nM)

    dims = prob.dims
    A, M, zdata = prob.A, prob.M, prob.zdata
    box, alpha = prob.box, prob.alpha
    saddle = SaddleOperator(prob.constraints, prob.q, paper_literal_grad)
    split = ProductPoint.from_flat

    def b1(z):
        return apply_smooth_grad(split(z, dims), A, zdata, counter).flat

    def b2(z):
        return apply_skew(split(z, dims), M, counter).flat

    def b3(z):
        return apply_saddle(split(z, dims), saddle, counter).flat

    def resolvent(gamma, z):
        return resolvent_block(split(z, dims), gamma, box, alpha).flat

    def project_X(z):
        return resolvent_block(split(z, dims), 1.0, box, alpha).flat

    bundle = OperatorBundle(resolvent=resolvent, b1=b1, b2=b2, b3=b3, project_X=project_X,
                            beta=beta, lip=lip)
    return bundle, beta, lip


def phi_maps(z: ProductPoint, gamma: float, prob: NlcProblem,
             paper_literal_grad: bool = False) -> ProductPoint:
    """Closed-form forward point, coded independently of the bundle.

    The dual block uses the Moreau form ``gamma (Id - prox_{g/gamma})(u/gamma + M x)``
    rather than a clamp.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x, u, v = z.x, z.u, z.v
    a, r = prob.constraints.a, prob.constraints.r
    if np.any(x <= 0) or np.any(v < 0):
        raise DomainError("phi_maps needs x > 0 and v >= 0")
    log_term = np.log(x) if paper_literal_grad else np.log(x) - np.log(a)
    grad = prob.A.T @ (prob.A @ x - prob.zdata) + prob.M.T @ u + v * log_term
    x1 = np.clip(x - gamma * grad, prob.box.lower, prob.box.upper)
    y = u / gamma + prob.M @ x
    x2 = gamma * (y - prox_scaled_l1(y, 1.0 / gamma, prob.alpha))
    e = x * (np.log(x) - np.log(a) - 1.0) - r
    x3 = np.maximum(v + gamma * e, 0.0)
    return ProductPoint(x1, x2, x3)


def alg1_defaults(prob: NlcProblem, sigma: float, *, norm_A: Optional[float] = None,
                  norm_M: Optional[float] = None, paper_literal_gamma: bool = False,
                  **kwargs) -> SolverConfig:
    """Step parameters derived from ``||A||`` and ``||M||``.

    ``eps = ||A||^4 (sqrt(1 + 16 ||M||^2 / ||A||^4) - 1) / (8 ||M||^2)`` and
    ``theta = 2 eps ||M|| (1 - sigma) / ||A||^2``. At this ``eps`` both terms
    of ``rho`` coincide and ``theta`` equals ``sqrt(1 - eps)(1 - sigma)``,
    the upper end of its admissible interval.

    If ``||M|| = 0`` or ``||A|| = 0`` the formula degenerates; ``eps = 1/2``
    and ``theta = sqrt(1 - eps)(1 - sigma)`` are used instead.

    ``paper_literal_gamma`` starts the backtracking from ``2 eps ||M||``
    (times ``sigma``), a comparison mode only. That start is
    generally outside the convergence theory, so the config is not
    validated.
    """
    if not 0.0 < sigma < 1.0:
        raise ValueError("sigma must lie in (0, 1)")
    nA = operator_norm(prob.A) if norm_A is None else norm_A
    nM = operator_norm(prob.M) if norm_M is None else norm_M
    beta = math.inf if nA == 0 else 1.0 / nA**2
    if nA > 0 and nM > 0:
        # rationalized to avoid cancellation when ||M||^2 << ||A||^4
        eps = 2.0 / (1.0 + math.sqrt(1.0 + 16.0 * nM**2 / nA**4))
        theta = 2.0 * eps * nM * (1.0 - sigma) / nA**2
    else:
        eps = 0.5
        theta = math.sqrt(1.0 - eps) * (1.0 - sigma)
    if paper_literal_gamma:
        kwargs.update(rho=2.0 * eps * nM, strict=False)
    return SolverConfig(eps=eps, sigma=sigma, theta=theta, beta=beta, lip=float(nM), **kwargs)


def _bisect(f, lo, hi, iters=60):
    """Vectorized bisection for sign changes of `f` on ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if np.any(np.sign(flo) == np.sign(fhi)):
        raise ArithmeticError("bisection bracket does not contain a sign change")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        left = np.sign(fmid) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fmid, flo)
        hi = np.where(left, hi, mid)
        fhi = np.where(left, fhi, fmid)
    return np.where(np.abs(flo) <= np.abs(fhi), lo, hi)


def compute_bounds(c: EntropicConstraints, slack=None) -> BoxSet:
    """Box between the two roots of each ``e_i``, upper face moved out by `slack`.

    ``e_i`` is strictly convex on ``(0, inf)`` with minimum ``-a_i - r_i < 0``
    at ``a_i`` and value ``-r_i > 0`` at ``0+`` and at ``a_i * e``, so there
    is one root in ``(0, a_i)`` and one in ``(a_i, a_i e)``.
    """
    a, r = c.a, c.r
    slack = np.zeros_like(a) if slack is None else as_vector(slack, "slack")
    if slack.shape != a.shape or np.any(slack < 0):
        raise ValueError("slack must be nonnegative with one entry per constraint")

    def e(x):
        return x * (np.log(x / a) - 1.0) - r

    lower = _bisect(e, np.full_like(a, 1e-300), a.copy())
    upper = _bisect(e, a.copy(), a * math.e)
    assert np.all(np.abs(e(lower)) <= 1e-12) and np.all(np.abs(e(upper)) <= 1e-12)
    return BoxSet(lower, upper + slack)


def objective(x: np.ndarray, prob: NlcProblem) -> float:
    res = prob.A @ x - prob.zdata
    return float(prob.alpha * np.abs(prob.M @ x).sum() + 0.5 * (res @ res))


def kkt_report(pt: ProductPoint, prob: NlcProblem, paper_literal_grad: bool = False) -> KktReport:
    """Natural-residual KKT diagnostics at ``(x, u, v)``.

    Stationarity sums the fixed-point residuals of the three projection
    conditions. If some ``x_i`` is at 0 the gradient of ``e`` is taken at
    a tiny positive floor and the report is flagged.
    """
    x, u, v = pt.x, pt.u, pt.v
    c, box = prob.constraints, prob.box
    e = eval_e(x, c)
    floored = bool(np.any(x <= DOMAIN_FLOOR))
    xg = np.maximum(x, 2 * DOMAIN_FLOOR) if floored else x
    ge = grad_e(xg, c, paper_literal_grad)
    Mx = prob.M @ x
    grad = prob.A.T @ (prob.A @ x - prob.zdata) + prob.M.T @ u + v * ge
    stat = (np.linalg.norm(x - project_box(x - grad, box))
            + np.linalg.norm(u - clamp(u + Mx, prob.alpha))
            + np.linalg.norm(v - project_nonneg(v + e)))
    box_viol = max(0.0, float(np.max(box.lower - x)), float(np.max(x - box.upper)))
    primal = max(0.0, float(np.max(e))) + box_viol
    dual = max(0.0, -float(np.min(v)))
    comp = float(np.abs(v * e).sum())
    return KktReport(float(stat), primal, dual, comp, objective(x, prob), floored)


def initial_point(prob: NlcProblem) -> ProductPoint:
    """``(box midpoint, 0, 1)``: interior to the box and to dom e."""
    return ProductPoint(prob.box.midpoint, np.zeros(prob.q), np.ones(prob.n))
