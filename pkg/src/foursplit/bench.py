"""Seeded instance generation, single runs, suites and aggregation."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import FoursplitError, LineSearchError
from .linalg import ProductPoint, operator_norm
from .nlconstr import (
    KktReport,
    NlcProblem,
    alg1_defaults,
    build_bundle,
    compute_bounds,
    initial_point,
    kkt_report,
    objective,
)
from .operators import EntropicConstraints
from .splitting import SolverConfig, regroup_fbhf, regroup_tseng, solve

logger = logging.getLogger(__name__)

ALGORITHMS = ("fb4op", "fbhf-ls", "tseng-ls")

# sigma used when none is given; see README for why it is not 0.99
DEFAULT_SIGMA = 0.6
FBHF_EPS = 0.8
TSENG_EPS = 0.8

CSV_COLUMNS = (
    "algorithm", "seed", "n", "m", "q", "iterations", "converged", "wall_ms",
    "final_residual", "objective", "kkt_stationarity", "kkt_primal_feas",
    "kkt_dual_feas", "kkt_complementarity", "backtracks_total", "matvec_A",
    "matvec_At", "matvec_M", "matvec_Mt", "e_eval", "grad_e_eval", "resolvent_count",
)
COUNTER_KEYS = ("matvec_A", "matvec_At", "matvec_M", "matvec_Mt", "e_eval",
                "grad_e_eval", "resolvent", "backtracks_total")


@dataclass(frozen=True)
class InstanceSpec:
    seed: int
    n: int
    m: int
    q: int
    alpha: float = 0.05
    a_value: float = 9.0
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if min(self.n, self.m, self.q) < 1:
            raise ValueError("n, m, q must be >= 1")
        if not 0 < self.sigma < 1:
            raise ValueError("sigma must lie in (0, 1)")
        if not self.a_value > 0:
            raise ValueError("a_value must be positive")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def generate_instance(spec: InstanceSpec) -> NlcProblem:
    """Random problem from a Philox stream keyed by ``spec.seed``.

    ``A`` and ``M`` are standard normal scaled by ``1/sqrt(n)``, ``zdata``
    is standard normal, ``r_i ~ U(-0.9 a, -0.1 a)`` and the box runs from
    the smaller root of each ``e_i`` to the larger root plus ``U(0, 1)``.
    """
    rng = np.random.Generator(np.random.Philox(spec.seed))
    n, m, q = spec.n, spec.m, spec.q
    scale = 1.0 / math.sqrt(n)
    A = rng.standard_normal((m, n)) * scale
    M = rng.standard_normal((q, n)) * scale
    zdata = rng.standard_normal(m)
    a = np.full(n, float(spec.a_value))
    r = rng.uniform(-0.9 * a, -0.1 * a)
    slack = rng.uniform(0.0, 1.0, n)
    c = EntropicConstraints(a, r)
    box = compute_bounds(c, slack)
    return NlcProblem(A=A, zdata=zdata, M=M, alpha=spec.alpha, box=box, constraints=c,
                      seed=spec.seed)


@dataclass
class RunResult:
    algorithm: str
    seed: Optional[int]
    n: int
    m: int
    q: int
    iterations: int
    wall_ms: float
    converged: bool
    final_residual: float
    objective: float
    kkt: KktReport
    counters: dict
    norm_ms: float = 0.0
    error: Optional[str] = None
    final: Optional[ProductPoint] = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n, self.m, self.q)

    def csv_row(self, timing: bool = True) -> list:
        k = self.kkt
        c = self.counters
        return [
            self.algorithm, "" if self.seed is None else self.seed, self.n, self.m, self.q,
            self.iterations, int(self.converged),
            repr(round(self.wall_ms, 3)) if timing else "",
            repr(self.final_residual), repr(self.objective),
            repr(k.stationarity), repr(k.primal_feas), repr(k.dual_feas), repr(k.complementarity),
            c["backtracks_total"], c["matvec_A"], c["matvec_At"], c["matvec_M"], c["matvec_Mt"],
            c["e_eval"], c["grad_e_eval"], c["resolvent"],
        ]

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm, "seed": self.seed,
            "n": self.n, "m": self.m, "q": self.q,
            "iterations": self.iterations, "converged": self.converged,
            "wall_ms": self.wall_ms, "norm_ms": self.norm_ms,
            "final_residual": self.final_residual, "objective": self.objective,
            "kkt": asdict(self.kkt), "counters": dict(self.counters), "error": self.error,
        }
        if self.final is not None:
            d["x"] = self.final.x.tolist()
            d["u"] = self.final.u.tolist()
            d["v"] = self.final.v.tolist()
        return d


def make_config(prob: NlcProblem, algorithm: str, sigma: float, tol: float, max_iter: int,
                norm_A: float, norm_M: float, paper_literal_gamma: bool = False,
                history_stride: int = 0) -> SolverConfig:
    """Per-algorithm step parameters.

    * ``fb4op``: `alg1_defaults`.
    * ``fbhf-ls``: ``eps = 0.8``, ``theta = sqrt(1 - eps)/2``, ``L = 0``.
    * ``tseng-ls``: same ``eps``/``theta``; ``beta = inf`` and ``L = 0``
      leave ``rho`` unbounded, so it is capped at ``4 / ||A||^2``
      (twice the longest forward-backward step).
    """
    common = dict(tol=tol, max_iter=max_iter, history_stride=history_stride)
    beta = math.inf if norm_A == 0 else 1.0 / norm_A**2
    if algorithm == "fb4op":
        return alg1_defaults(prob, sigma, norm_A=norm_A, norm_M=norm_M,
                             paper_literal_gamma=paper_literal_gamma, **common)
    if algorithm == "fbhf-ls":
        return SolverConfig(eps=FBHF_EPS, sigma=sigma, theta=math.sqrt(1 - FBHF_EPS) / 2,
                            beta=beta, lip=0.0, **common)
    if algorithm == "tseng-ls":
        return SolverConfig(eps=TSENG_EPS, sigma=sigma, theta=math.sqrt(1 - TSENG_EPS) / 2,
                            beta=math.inf, lip=0.0, gamma_cap=tseng_gamma_cap(norm_A), **common)
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def tseng_gamma_cap(norm_A: float) -> float:
    return 4.0 / norm_A**2 if norm_A > 0 else 1.0


def run_one(prob: NlcProblem, algorithm: str, sigma: float = DEFAULT_SIGMA, tol: float = 1e-6,
            max_iter: int = 200_000, *, paper_literal_gamma: bool = False,
            paper_literal_grad: bool = False, history_stride: int = 0,
            z0: Optional[ProductPoint] = None) -> RunResult:
    """Solve `prob` with one algorithm and collect telemetry.

    A failed line search is recorded in ``error`` rather than raised.
    Wall time covers the solve only; norm estimation is timed separately.
    """
    t0 = time.perf_counter()
    norm_A = operator_norm(prob.A)
    norm_M = operator_norm(prob.M)
    norm_ms = 1e3 * (time.perf_counter() - t0)

    counter = Counter()
    bundle, _, _ = build_bundle(prob, counter, paper_literal_grad, norm_A=norm_A, norm_M=norm_M)
    if algorithm == "fbhf-ls":
        bundle = regroup_fbhf(bundle)
    elif algorithm == "tseng-ls":
        bundle = regroup_tseng(bundle, tseng_gamma_cap(norm_A))
    cfg = make_config(prob, algorithm, sigma, tol, max_iter, norm_A, norm_M,
                      paper_literal_gamma, history_stride)

    start = initial_point(prob) if z0 is None else z0
    error = None
    try:
        out = solve(start.flat, cfg, bundle)
        final = ProductPoint.from_flat(out.final, prob.dims)
        iterations, converged, res = out.iterations, out.converged, out.final_residual
        wall_ms = 1e3 * out.wall_time
        backtracks, history = out.backtracks_total, out.history
        resolvents = out.totals["resolvent"]
    except LineSearchError as exc:
        logger.warning("%s failed on seed %s: %s", algorithm, prob.seed, exc)
        error = str(exc)
        final, iterations, converged, res = start, exc.iteration or 0, False, math.nan
        wall_ms, backtracks, history, resolvents = math.nan, exc.backtracks, [], 0

    counters = {key: int(counter[key]) for key in COUNTER_KEYS}
    counters["backtracks_total"] = int(backtracks)
    counters["resolvent"] = int(resolvents)
    kkt = kkt_report(final, prob, paper_literal_grad)
    return RunResult(
        algorithm=algorithm, seed=prob.seed, n=prob.n, m=prob.m, q=prob.q,
        iterations=iterations, wall_ms=wall_ms, converged=converged, final_residual=res,
        objective=objective(final.x, prob), kkt=kkt, counters=counters, norm_ms=norm_ms,
        error=error, final=final, history=history,
    )


@dataclass(frozen=True)
class SuiteTask:
    spec: InstanceSpec
    algorithm: str
    tol: float
    max_iter: int


def _run_task(task: SuiteTask) -> RunResult:
    try:
        prob = generate_instance(task.spec)
        res = run_one(prob, task.algorithm, task.spec.sigma, task.tol, task.max_iter)
    except FoursplitError as exc:
        s = task.spec
        nan = math.nan
        res = RunResult(task.algorithm, s.seed, s.n, s.m, s.q, 0, nan, False, nan, nan,
                        KktReport(nan, nan, nan, nan, nan), {k: 0 for k in COUNTER_KEYS},
                        error=str(exc))
    res.final = None  # keep inter-process payloads small
    return res


def _sort_key(r: RunResult):
    return (r.n, r.m, r.q, r.seed if r.seed is not None else -1,
            ALGORITHMS.index(r.algorithm) if r.algorithm in ALGORITHMS else len(ALGORITHMS))


def run_suite(specs: Sequence[InstanceSpec], algorithms: Sequence[str], tol: float = 1e-6,
              max_iter: int = 200_000, parallelism: int = 1) -> list[RunResult]:
    """Run every (instance, algorithm) pair; results sorted by dims, seed, algorithm."""
    tasks = [SuiteTask(s, a, tol, max_iter) for s in specs for a in algorithms]
    if not tasks:
        raise ValueError("empty suite")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    if parallelism <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_run_task, tasks))
    return sorted(results, key=_sort_key)


def results_to_csv(results: Iterable[RunResult], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow(r.csv_row(timing))
    return buf.getvalue()


@dataclass
class AggregateRow:
    algorithm: str
    n: int
    m: int
    q: int
    instance_count: int
    converged_count: int
    avg_time_ms: float
    avg_iterations: float
    avg_backtracks: float
    convergence_rate: float
    avg_m_applications: float

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.n, self.m, self.q)


def aggregate(results: Iterable[RunResult]) -> list[AggregateRow]:
    """Means per (algorithm, dims) over converged runs."""
    groups = defaultdict(list)
    for r in results:
        groups[(r.algorithm, r.n, r.m, r.q)].append(r)
    rows = []
    for (alg, n, m, q), rs in groups.items():
        ok = [r for r in rs if r.converged]
        if not ok:
            logger.warning("no converged runs for %s at n=%d m=%d q=%d", alg, n, m, q)

        def mean(vals):
            vals = list(vals)
            return float(np.mean(vals)) if vals else math.nan

        rows.append(AggregateRow(
            algorithm=alg, n=n, m=m, q=q, instance_count=len(rs), converged_count=len(ok),
            avg_time_ms=mean(r.wall_ms for r in ok),
            avg_iterations=mean(r.iterations for r in ok),
            avg_backtracks=mean(r.counters["backtracks_total"] for r in ok),
            convergence_rate=len(ok) / len(rs),
            avg_m_applications=mean(r.counters["matvec_M"] + r.counters["matvec_Mt"] for r in ok),
        ))
    rows.sort(key=lambda a: (a.n, a.m, a.q, ALGORITHMS.index(a.algorithm)
                             if a.algorithm in ALGORITHMS else 99))
    return rows


def aggregate_to_csv(rows: Iterable[AggregateRow], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "n", "m", "q", "instance_count", "converged_count", "avg_time_ms",
                "avg_iterations", "avg_backtracks", "convergence_rate", "avg_m_applications"])
    for a in rows:
        w.writerow([a.algorithm, a.n, a.m, a.q, a.instance_count, a.converged_count,
                    f"{a.avg_time_ms:.3f}" if timing else "", f"{a.avg_iterations:.2f}",
                    f"{a.avg_backtracks:.2f}", f"{a.convergence_rate:.4f}",
                    f"{a.avg_m_applications:.2f}"])
    return buf.getvalue()


def format_table(rows: Sequence[AggregateRow], timing: bool = True) -> str:
    """Text table: one block per n, one column pair per q, one line per algorithm."""
    by_n = defaultdict(lambda: defaultdict(dict))
    qs = defaultdict(list)
    for a in rows:
        by_n[a.n][a.algorithm][a.q] = a
        if a.q not in qs[a.n]:
            qs[a.n].append(a.q)
    lines = []
    for n in sorted(by_n):
        q_list = sorted(qs[n])
        head = f"{'n':>6} | {'algorithm':<9}"
        for q in q_list:
            head += f" | q={q:<5} {'time(ms)':>10} {'iter':>9} {'conv':>5}"
        lines.append(head)
        lines.append("-" * len(head))
        algs = sorted(by_n[n], key=lambda s: ALGORITHMS.index(s) if s in ALGORITHMS else 99)
        for alg in algs:
            line = f"{n:>6} | {alg:<9}"
            for q in q_list:
                a = by_n[n][alg].get(q)
                if a is None:
                    line += f" | {'':7} {'-':>10} {'-':>9} {'-':>5}"
                    continue
                t = f"{a.avg_time_ms:10.2f}" if timing else f"{'-':>10}"
                line += f" | {'':7} {t} {a.avg_iterations:9.1f} {a.converged_count:>2}/{a.instance_count:<2}"
            lines.append(line)
        lines.append("")
    return "\n".join(lines)


def default_grid(sizes: Sequence[int], qfracs: Sequence[float], seeds: int,
                 sigma: float = DEFAULT_SIGMA, alpha: float = 0.05,
                 a_value: float = 9.0) -> list[InstanceSpec]:
    """``n = m`` for each size, ``q = round(n * frac)``, seeds ``0 .. seeds-1``."""
    specs = []
    for n in sizes:
        for f in qfracs:
            q = max(1, int(round(n * f)))
            for s in range(seeds):
                specs.append(InstanceSpec(seed=s, n=n, m=n, q=q, alpha=alpha,
                                          a_value=a_value, sigma=sigma))
    return specs
