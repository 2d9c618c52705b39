"""Four-operator forward-backward-half-forward splitting with line search.

Finds ``z`` in a closed convex set ``X`` with ``0 in A z + B1 z + B2 z + B3 z``
where ``A`` is maximally monotone (accessed through its resolvent), ``B1``
is ``beta``-cocoercive, ``B2`` is monotone and ``L``-Lipschitz, and ``B3``
is monotone and continuous on its domain. Each iteration computes::

    x_n     = J_{g A}(z_n - g (B1 + B2 + B3) z_n)
    z_{n+1} = P_X(x_n + g (B2 + B3) z_n - g (B2 + B3) x_n)

with ``g`` the largest of ``rho*sigma, rho*sigma**2, ...`` such that
``g ||B3 z_n - B3 x_n|| <= theta ||z_n - x_n||``. Only ``B3`` is
re-evaluated while backtracking; ``B1`` and ``B2`` are applied once and
twice per iteration respectively.

Points are flat float64 arrays. Multi-block problems pack their blocks
(see `foursplit.linalg.ProductPoint`).
"""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, LineSearchError

__all__ = [
    "OperatorBundle",
    "SolverConfig",
    "IterateRecord",
    "SolveOutcome",
    "zero_operator",
    "identity_projection",
    "compute_rho",
    "chi",
    "eps_star",
    "forward_point",
    "line_search",
    "step",
    "solve",
    "residual",
    "phi",
    "regroup_fbhf",
    "regroup_tseng",
]

Operator = Callable[[np.ndarray], np.ndarray]

# slack allowed when theta sits on the upper end of its interval up to rounding
THETA_RTOL = 1e-12


def zero_operator(z: np.ndarray) -> np.ndarray:
    return np.zeros_like(z)


def identity_projection(z: np.ndarray) -> np.ndarray:
    return z


@dataclass(frozen=True)
class OperatorBundle:
    """The solver's view of a monotone inclusion.

    Parameters
    ----------
    resolvent : callable
        ``resolvent(gamma, z)`` returns ``J_{gamma A} z``.
    b1, b2, b3 : callable
        Single-valued operators. `b3` should raise
        `foursplit.errors.DomainError` outside its domain.
    project_X : callable
        Projection onto the constraint set ``X``.
    beta : float
        Cocoercivity constant of `b1` (``inf`` when `b1` is zero).
    lip : float
        Lipschitz constant of `b2` (0 when `b2` is zero).
    gamma_cap : float, optional
        Suggested cap for the initial step when `beta` and `lip` leave it
        unbounded.
    """

    resolvent: Callable[[float, np.ndarray], np.ndarray]
    b1: Operator = zero_operator
    b2: Operator = zero_operator
    b3: Operator = zero_operator
    project_X: Operator = identity_projection
    beta: float = math.inf
    lip: float = 0.0
    gamma_cap: Optional[float] = None
    name: str = "fb4op"


def compute_rho(eps: float, beta: float, lip: float, gamma_cap: float = 1e6) -> float:
    """``min(2 beta eps, sqrt(1 - eps) / L)``, capped at `gamma_cap`.

    ``beta = inf`` makes the first term infinite and ``L = 0`` the second.
    """
    if not 0.0 < eps < 1.0:
        raise ConfigError(f"eps must lie in (0, 1), got {eps}")
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    if not lip >= 0:
        raise ConfigError(f"Lipschitz constant must be nonnegative, got {lip}")
    t1 = math.inf if math.isinf(beta) else 2.0 * beta * eps
    t2 = math.inf if lip == 0 else math.sqrt(1.0 - eps) / lip
    return min(t1, t2, gamma_cap)


def chi(lip: float, beta: float) -> float:
    """Largest constant step scale when ``B3 = 0``."""
    return 4.0 * beta / (1.0 + math.sqrt(1.0 + 16.0 * beta**2 * lip**2))


def eps_star(lip: float, beta: float) -> float:
    """The ``eps`` balancing ``2 beta eps = sqrt(1 - eps) / L``."""
    return 2.0 / (1.0 + math.sqrt(1.0 + 16.0 * beta**2 * lip**2))


@dataclass(frozen=True)
class SolverConfig:
    """Step-size parameters and stopping rule.

    ``rho`` is derived from ``(eps, beta, lip, gamma_cap)`` unless given.
    ``theta`` must satisfy ``0 < theta < sqrt(1 - eps) - lip * rho * sigma``;
    a value on the upper end within rounding is accepted. Set
    ``strict=False`` to skip the check (for runs outside the convergence
    theory, e.g. the literal initial step of the entropic example).
    ``history_stride = 0`` disables per-iterate history.
    """

    eps: float
    sigma: float
    theta: float
    beta: float = math.inf
    lip: float = 0.0
    tol: float = 1e-6
    max_iter: int = 10000
    gamma_cap: float = 1e6
    rho: Optional[float] = None
    max_backtracks: int = 200
    history_stride: int = 1
    strict: bool = True

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ConfigError(f"sigma must lie in (0, 1), got {self.sigma}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1 or self.max_backtracks < 0 or self.history_stride < 0:
            raise ConfigError("max_iter must be >= 1, max_backtracks and history_stride >= 0")
        if not self.gamma_cap > 0:
            raise ConfigError("gamma_cap must be positive")
        rho = compute_rho(self.eps, self.beta, self.lip, self.gamma_cap)
        if self.rho is None:
            object.__setattr__(self, "rho", rho)
        elif not (self.rho > 0 and math.isfinite(self.rho)):
            raise ConfigError(f"rho must be positive and finite, got {self.rho}")
        if self.strict:
            bound = self.theta_bound
            if not (self.theta > 0 and self.theta < bound + THETA_RTOL * max(1.0, abs(bound))):
                raise ConfigError(
                    f"theta={self.theta!r} outside (0, {bound!r}) "
                    f"for eps={self.eps}, lip={self.lip}, rho={self.rho}, sigma={self.sigma}")

    @property
    def theta_bound(self) -> float:
        return math.sqrt(1.0 - self.eps) - self.lip * self.rho * self.sigma

    @classmethod
    def for_bundle(cls, bundle: OperatorBundle, eps: float, sigma: float, theta: float,
                   **kwargs) -> "SolverConfig":
        """Config taking ``beta``, ``lip`` and any ``gamma_cap`` hint from `bundle`."""
        if bundle.gamma_cap is not None:
            kwargs.setdefault("gamma_cap", bundle.gamma_cap)
        return cls(eps=eps, sigma=sigma, theta=theta, beta=bundle.beta, lip=bundle.lip, **kwargs)

    def replace(self, **changes) -> "SolverConfig":
        if "rho" not in changes and {"eps", "beta", "lip", "gamma_cap"} & changes.keys():
            changes["rho"] = None
        return replace(self, **changes)


@dataclass
class IterateRecord:
    n: int
    z: Optional[np.ndarray]
    x: Optional[np.ndarray]
    gamma: float
    k: int
    backtracks: int
    residual: float
    eval_counts: dict


@dataclass
class SolveOutcome:
    final: np.ndarray
    iterations: int
    converged: bool
    final_residual: float
    gammas: list = field(default_factory=list)
    backtracks: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    history: list = field(default_factory=list)
    totals: Counter = field(default_factory=Counter)
    wall_time: float = 0.0

    @property
    def backtracks_total(self) -> int:
        return int(sum(self.backtracks))


def residual(z_next: np.ndarray, z: np.ndarray) -> float:
    """Relative successive change ``||z_next - z|| / max(1, ||z||)``."""
    return float(np.linalg.norm(z_next - z) / max(1.0, np.linalg.norm(z)))


def phi(z: np.ndarray, y: np.ndarray, gamma: float, bundle: OperatorBundle) -> float:
    """``||z - J_{gamma A}(z - gamma y)|| / gamma``, nonincreasing in gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return float(np.linalg.norm(z - bundle.resolvent(gamma, z - gamma * y)) / gamma)


def forward_point(z: np.ndarray, gamma: float, bundle: OperatorBundle,
                  counts: Optional[Counter] = None) -> np.ndarray:
    """``J_{gamma A}(z - gamma (B1 + B2 + B3) z)``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    w = bundle.b1(z) + bundle.b2(z) + bundle.b3(z)
    if counts is not None:
        counts.update(b1=1, b2=1, b3=1, resolvent=1)
    return bundle.resolvent(gamma, z - gamma * w)


def _search(z, w, b3z, cfg, bundle, counts, iteration=None):
    """Backtrack from ``rho*sigma``; returns ``(gamma, x, B3 x, backtracks)``."""
    sigma, theta = cfg.sigma, cfg.theta
    gamma = cfg.rho * sigma
    k = 0
    while True:
        x = bundle.resolvent(gamma, z - gamma * w)
        b3x = bundle.b3(x)
        counts["resolvent"] += 1
        counts["b3"] += 1
        lhs = gamma * np.linalg.norm(b3z - b3x)
        rhs = theta * np.linalg.norm(z - x)
        if lhs <= rhs:
            return gamma, x, b3x, k
        if k >= cfg.max_backtracks:
            raise LineSearchError(
                f"line search failed after {k} backtracks (gamma={gamma:.3e}, "
                f"lhs={lhs:.3e}, rhs={rhs:.3e})",
                iteration=iteration, gamma=gamma, backtracks=k, lhs=float(lhs), rhs=float(rhs))
        gamma *= sigma
        k += 1


def line_search(z: np.ndarray, cfg: SolverConfig, bundle: OperatorBundle,
                counts: Optional[Counter] = None):
    """Accepted step at `z`.

    Returns ``(gamma, x, backtracks)`` where ``gamma = rho * sigma**(1 + backtracks)``
    is the first trial passing ``gamma ||B3 z - B3 x|| <= theta ||z - x||``.
    """
    counts = Counter() if counts is None else counts
    b3z = bundle.b3(z)
    w = bundle.b1(z) + bundle.b2(z) + b3z
    counts["b1"] += 1
    counts["b2"] += 1
    counts["b3"] += 1
    gamma, x, _, k = _search(z, w, b3z, cfg, bundle, counts)
    return gamma, x, k


def _step(z, cfg, bundle, counts, n):
    b1z = bundle.b1(z)
    b2z = bundle.b2(z)
    b3z = bundle.b3(z)
    counts["b1"] += 1
    counts["b2"] += 1
    counts["b3"] += 1
    gamma, x, b3x, k = _search(z, b1z + b2z + b3z, b3z, cfg, bundle, counts, iteration=n)
    b2x = bundle.b2(x)
    counts["b2"] += 1
    z_next = bundle.project_X(x + gamma * (b2z + b3z) - gamma * (b2x + b3x))
    counts["project_X"] += 1
    return z_next, x, gamma, k


def step(z: np.ndarray, cfg: SolverConfig, bundle: OperatorBundle, n: int = 0):
    """One iteration from `z`; returns ``(z_next, record)``."""
    counts = Counter()
    z_next, x, gamma, k = _step(z, cfg, bundle, counts, n)
    rec = IterateRecord(n=n, z=z, x=x, gamma=gamma, k=k + 1, backtracks=k,
                        residual=residual(z_next, z), eval_counts=dict(counts))
    return z_next, rec


def solve(z0: np.ndarray, cfg: SolverConfig, bundle: OperatorBundle) -> SolveOutcome:
    """Iterate until the relative change drops to ``cfg.tol`` or ``cfg.max_iter``.

    `z0` must lie in the domain of ``B3``. Hitting ``max_iter`` is not an
    error; the outcome reports ``converged=False``. A failed line search
    raises `LineSearchError`.
    """
    z = np.array(z0, dtype=np.float64)
    out = SolveOutcome(final=z, iterations=0, converged=False, final_residual=math.inf)
    totals = out.totals
    stride = cfg.history_stride
    t0 = time.perf_counter()
    for n in range(cfg.max_iter):
        counts = Counter()
        z_next, x, gamma, k = _step(z, cfg, bundle, counts, n)
        r = residual(z_next, z)
        out.gammas.append(gamma)
        out.backtracks.append(k)
        out.residuals.append(r)
        totals.update(counts)
        if stride and n % stride == 0:
            out.history.append(IterateRecord(n=n, z=z, x=x, gamma=gamma, k=k + 1, backtracks=k,
                                             residual=r, eval_counts=dict(counts)))
        z = z_next
        out.iterations = n + 1
        out.final_residual = r
        if r <= cfg.tol:
            out.converged = True
            break
    out.wall_time = time.perf_counter() - t0
    out.final = z
    return out


def regroup_fbhf(bundle: OperatorBundle) -> OperatorBundle:
    """Fold the Lipschitz operator into the continuous one.

    Solving the result is the FBHF method with line search: every trial
    step now re-applies ``B2``.
    """
    b2, b3 = bundle.b2, bundle.b3

    def b3_merged(z):
        return b2(z) + b3(z)

    return replace(bundle, b2=zero_operator, b3=b3_merged, lip=0.0, name="fbhf-ls")


def regroup_tseng(bundle: OperatorBundle, gamma_cap: float) -> OperatorBundle:
    """Fold every single-valued operator into the continuous one (Tseng with line search)."""
    if not gamma_cap > 0:
        raise ConfigError("gamma_cap must be positive")
    b1, b2, b3 = bundle.b1, bundle.b2, bundle.b3

    def b3_merged(z):
        return b1(z) + b2(z) + b3(z)

    return replace(bundle, b1=zero_operator, b2=zero_operator, b3=b3_merged,
                   beta=math.inf, lip=0.0, gamma_cap=gamma_cap, name="tseng-ls")
