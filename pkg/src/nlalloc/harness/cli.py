"""Command line entry point: ``nlalloc {run,oracle,check-connectivity,list-scenarios}``.

Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
3 runtime or integration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from pathlib import Path

from ..errors import AllocError, ConfigError
from ..netgraph import check_uniform_connectivity, is_connected, union_graph
from ..oracle import solve_kkt
from .build import build_problem, build_schedule
from .config import list_builtin, load_config
from .runner import check, run

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _load(ref, seed):
    cfg = load_config(ref)
    return cfg.with_seed(seed) if seed is not None else cfg


def _run_one(ref, out, seed, quiet) -> int:
    try:
        cfg = _load(ref, seed)
        report = run(cfg, out_dir=out, quiet=quiet)
        return check(cfg, report)
    except ConfigError as exc:
        print(f"{ref}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AllocError, ArithmeticError, RuntimeError) as exc:
        print(f"{ref}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def cmd_run(args) -> int:
    if args.jobs > 1 and len(args.configs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            job = partial(_run_one, out=args.out, seed=args.seed, quiet=args.quiet)
            codes = list(pool.map(job, args.configs))
    else:
        codes = [_run_one(ref, args.out, args.seed, args.quiet) for ref in args.configs]
    # the most severe outcome wins
    return max(codes)


def cmd_oracle(args) -> int:
    cfg = _load(args.config, args.seed)
    problem, _, _ = build_problem(cfg)
    sol = solve_kkt(problem)
    if not args.quiet:
        print(f"oracle for {cfg.name}: n={problem.n} d={problem.d}")
        print(f"  phi*      = {sol.phi_star.tolist()}")
        print(f"  F* static = {sol.f_star!r}")
        print(f"  ||X*a-b|| = {sol.residual:.3e}")
        print(f"  grad err  = {sol.gradient_error(problem):.3e}")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        sol.to_csv(out / f"{cfg.name}_oracle.csv")
    return EXIT_OK if sol.is_valid(problem) else EXIT_CHECK


def cmd_connectivity(args) -> int:
    cfg = _load(args.config, args.seed)
    n = cfg.require("problem", "n", int)
    schedule, window = build_schedule(cfg, n)
    each = [is_connected(g) for g in schedule.graphs]
    union_ok = is_connected(union_graph(schedule.graphs))
    uniform = check_uniform_connectivity(schedule, window)
    if not args.quiet:
        for k, (g, ok) in enumerate(zip(schedule.graphs, each), 1):
            print(f"graph {k}: {g.n_links} links, {'connected' if ok else 'disconnected'}")
        print(f"union: {'connected' if union_ok else 'disconnected'}")
        print(f"uniformly connected over windows of {window:g}: {'yes' if uniform else 'no'}")
    return EXIT_OK if uniform else EXIT_CHECK


def cmd_list(args) -> int:
    for name in list_builtin():
        cfg = load_config(name)
        print(f"{name:16s} {cfg.scenario}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="directory for CSV and report artifacts")
    common.add_argument("--seed", type=int, metavar="N", help="override the problem and schedule seeds")
    common.add_argument("--quiet", action="store_true", help="suppress the human-readable report")

    parser = argparse.ArgumentParser(prog="nlalloc", description="Distributed allocation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log library warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="simulate one or more configs and apply their checks")
    p.add_argument("configs", nargs="+", metavar="config", help="config path or built-in scenario name")
    p.add_argument("--jobs", type=int, default=1, metavar="N", help="run independent configs in N processes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", parents=[common], help="solve the centralized optimality conditions")
    p.add_argument("config")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check-connectivity", parents=[common], help="check uniform connectivity of the schedule")
    p.add_argument("config")
    p.set_defaults(func=cmd_connectivity)

    p = sub.add_parser("list-scenarios", help="list built-in scenarios")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AllocError, ArithmeticError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
