"""Command line interface: ``gen``, ``solve`` and ``bench``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import bench
from .errors import FoursplitError, LineSearchError
from .nlconstr import NlcProblem

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

logger = logging.getLogger("foursplit")


def _float_list(text: str) -> list[float]:
    # accepts fractions such as 1/3
    return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="foursplit", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a seeded problem instance as JSON")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int)
    g.add_argument("--q", type=int, required=True)
    g.add_argument("--alpha", type=float, default=0.05)
    g.add_argument("--a", type=float, default=9.0, dest="a_value")
    g.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("solve", help="solve a problem instance")
    s.add_argument("--instance", type=Path, required=True)
    s.add_argument("--algorithm", choices=bench.ALGORITHMS, default="fb4op")
    s.add_argument("--sigma", type=float, default=bench.DEFAULT_SIGMA)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=200_000)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--history", type=Path, help="per-iteration CSV")
    s.add_argument("--paper-literal-gamma", action="store_true",
                   help="start backtracking from 2*eps*||M|| (fb4op only)")
    s.add_argument("--paper-literal-grad", action="store_true",
                   help="use ln(x_i) instead of ln(x_i/a_i) as the constraint gradient")

    b = sub.add_parser("bench", help="run an algorithm comparison suite")
    b.add_argument("--sizes", type=_int_list, default=[60, 120, 240])
    b.add_argument("--qfracs", type=_float_list, default=[1 / 3, 1 / 2, 2 / 3])
    b.add_argument("--seeds", type=int, default=20)
    b.add_argument("--algorithms", type=_str_list, default=["fb4op", "fbhf-ls"])
    b.add_argument("--parallelism", type=int, default=1)
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--max-iter", type=int, default=200_000)
    b.add_argument("--sigma", type=float, default=bench.DEFAULT_SIGMA)
    b.add_argument("--alpha", type=float, default=0.05)
    b.add_argument("--a", type=float, default=9.0, dest="a_value")
    b.add_argument("--csv", type=Path, required=True)
    b.add_argument("--table", type=Path)
    b.add_argument("--no-timing", action="store_true",
                   help="leave wall-clock columns empty so output is byte-reproducible")
    return p


def cmd_gen(args) -> int:
    spec = bench.InstanceSpec(seed=args.seed, n=args.n, m=args.m or args.n, q=args.q,
                              alpha=args.alpha, a_value=args.a_value)
    prob = bench.generate_instance(spec)
    args.out.write_text(prob.to_json(), encoding="utf-8")
    return EXIT_OK


def _write_history(path: Path, res: bench.RunResult) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "gamma", "k", "backtracks", "residual"])
        for rec in res.history:
            w.writerow([rec.n, repr(rec.gamma), rec.k, rec.backtracks, repr(rec.residual)])


def cmd_solve(args) -> int:
    try:
        prob = NlcProblem.from_json(args.instance.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        logger.error("cannot read instance: %s", exc)
        return EXIT_INPUT
    res = bench.run_one(prob, args.algorithm, args.sigma, args.tol, args.max_iter,
                        paper_literal_gamma=args.paper_literal_gamma,
                        paper_literal_grad=args.paper_literal_grad,
                        history_stride=1 if args.history else 0)
    args.out.write_text(json.dumps(res.to_dict(), indent=1), encoding="utf-8")
    if args.history:
        _write_history(args.history, res)
    if res.error is not None:
        logger.error("%s", res.error)
        return EXIT_NUMERIC
    print(f"{res.algorithm}: iterations={res.iterations} converged={res.converged} "
          f"objective={res.objective:.10g} residual={res.final_residual:.3e}")
    return EXIT_OK


def cmd_bench(args) -> int:
    specs = bench.default_grid(args.sizes, args.qfracs, args.seeds, sigma=args.sigma,
                               alpha=args.alpha, a_value=args.a_value)
    results = bench.run_suite(specs, args.algorithms, args.tol, args.max_iter, args.parallelism)
    timing = not args.no_timing
    args.csv.write_text(bench.results_to_csv(results, timing), encoding="utf-8")
    rows = bench.aggregate(results)
    table = bench.format_table(rows, timing)
    if args.table:
        args.table.write_text(table + "\n" + bench.aggregate_to_csv(rows, timing), encoding="utf-8")
    print(table)
    failed = [r for r in results if r.error is not None]
    return EXIT_NUMERIC if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"gen": cmd_gen, "solve": cmd_solve, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except LineSearchError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except (FoursplitError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
