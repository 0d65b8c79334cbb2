"""Command-line entry point.

Exit codes: 0 converged (or success), 1 usage or I/O error, 2 iteration
budget exhausted, 3 diverged or solver failure, 4 practical parameter
check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import rgd
from .config import load_config
from .errors import (
    BacktrackExhausted,
    InfeasibleStart,
    NonConvergence,
    NumericalBreakdown,
    OrthosolveError,
)
from .harness import SweepSpec, f_measure, round_assignment, run_sweep
from .lsalm import run
from .matcore import read_matrix, read_points, write_matrix
from .problems import gen_graph_matching, gen_qp, gen_spca, synthetic_points
from .record import BUDGET, CONVERGED
from .theory import recommend_r_RY, validate_params

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_FAILED = 3
EXIT_CHECK = 4


class UsageError(Exception):
    pass


def _status_code(status: str) -> int:
    return {CONVERGED: EXIT_OK, BUDGET: EXIT_BUDGET}.get(status, EXIT_FAILED)


def cmd_generate(args) -> int:
    if args.kind == "gm":
        if args.points1:
            p1, p2 = read_points(args.points1), read_points(args.points2 or args.points1)
        else:
            p1 = synthetic_points(args.n or 30, args.seed)
            p2 = p1.copy()
        problem = gen_graph_matching(p1, p2, args.mu, seed=args.seed, edges=args.edges)
    else:
        if args.m is None or args.n is None:
            raise UsageError("--m and --n are required")
        if args.m < args.n or args.n < 1:
            raise UsageError(f"need m >= n >= 1, got m={args.m}, n={args.n}")
        if args.kind == "qp":
            problem = gen_qp(args.m, args.n, args.mu, args.seed)
        else:
            problem = gen_spca(args.p, args.m, args.n, args.mu, args.seed)
    problem.save(args.out)
    print(f"wrote {problem.name} problem ({problem.m}x{problem.n}) to {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    problem = cfg.build_problem()
    params = cfg.build_params(problem)
    X0 = cfg.build_initial(problem)
    if cfg.algorithm == "rgd":
        record = rgd(problem, params, X0, log_every=cfg.log_every)
    else:
        record = run(problem, params, cfg.build_stop(problem), X0, log_every=cfg.log_every)
    timing = not args.no_timing
    if (p := cfg.output_path("csv")) is not None:
        record.write_csv(p, timing=timing)
    if (p := cfg.output_path("json")) is not None:
        record.write_json(p, timing=timing)
    if (p := cfg.output_path("solution")) is not None:
        write_matrix(p, record.X)
    print(f"{record.algorithm}: {record.status} after {record.total_iters} iterations, "
          f"obj {record.final_obj:.10g}, feas {record.final_feas:.3e}, "
          f"kkt {record.final_kkt:.3e}")
    return _status_code(record.status)


def cmd_sweep(args) -> int:
    path = Path(args.spec)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"sweep spec not found: {path}") from None
    spec = SweepSpec.from_dict(data)
    if spec.problem.get("kind") == "load":
        spec.problem["path"] = str(path.parent / spec.problem["path"])
    out = args.out or data.get("output")
    if out is None:
        raise UsageError("no output CSV given (use --out or an 'output' key)")
    out = Path(out) if args.out else path.parent / out
    result = run_sweep(spec, jobs=args.jobs)
    result.write_csv(out)
    print(f"wrote {len(result.cells)} cells to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    if cfg.algorithm != "lsalm":
        raise UsageError("check applies to LSALM configurations only")
    problem = cfg.build_problem()
    params = cfg.build_params(problem)
    report = validate_params(problem, params)
    print(report.format())
    r_min, R_Y = recommend_r_RY(problem, params, args.delta, args.xi)
    c = report.constants
    print(f"recipe (delta={args.delta}, xi={args.xi}): c1 = {c.r_min_c1:.6g}, "
          f"c2 = {c.r_min_c2:.6g}, r_min = {r_min:.6g}, R_Y = {R_Y:.6g}")
    return EXIT_OK if report.practical_ok else EXIT_CHECK


def cmd_round(args) -> int:
    X = read_matrix(args.solution)
    P = round_assignment(X)
    if args.out:
        write_matrix(args.out, P)
    perm = np.argmax(P, axis=1)
    print("assignment: " + " ".join(str(int(j)) for j in perm))
    if args.truth:
        T = read_matrix(args.truth)
        print(f"F-measure: {f_measure(P, T):.6g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthosolve", description="Retraction-free optimization over the Stiefel manifold.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a benchmark problem directory")
    g.add_argument("kind", choices=("qp", "spca", "gm"))
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--p", type=int, default=200, help="sparse PCA sample count")
    g.add_argument("--mu", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--points1", help="graph matching: landmark file of the first graph")
    g.add_argument("--points2", help="graph matching: landmark file of the second graph")
    g.add_argument("--edges", choices=("delaunay", "complete"), default="delaunay")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run a solver from a JSON config")
    s.add_argument("config")
    s.add_argument("--no-timing", action="store_true", help="write zero timings")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run a parameter sweep from a JSON spec")
    w.add_argument("spec")
    w.add_argument("--out")
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="report the parameter conditions of a config")
    c.add_argument("config")
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--xi", type=float, default=1.0)
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("round", help="round a solution to a permutation")
    r.add_argument("solution")
    r.add_argument("--truth")
    r.add_argument("--out")
    r.set_defaults(func=cmd_round)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (NumericalBreakdown, BacktrackExhausted, NonConvergence) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (UsageError, InfeasibleStart, OSError, ValueError, KeyError, TypeError,
            OrthosolveError) as exc:
        msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
