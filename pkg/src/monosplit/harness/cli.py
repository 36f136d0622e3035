"""Command line front end.

Subcommands::

    monosplit gen      --seed 1 --dim 4 --kind affine-interior --out p.json
    monosplit solve    --problem p.json --method orfbs --lambda auto
    monosplit bench    --problem p.json --methods orfbs,fbhfs,sfrbs --out-dir runs/
    monosplit certify  --op '{"type": "skew", "m": [[0, 1], [-1, 0]]}'
    monosplit pd-solve --problem composite.json

Exit codes: 0 success, 1 configuration error, 2 divergence, 3 oracle failure.
``MONOSPLIT_LOG`` (off, info or debug) sets the log level.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from ..algorithms import METHODS, StoppingRule, solve
from ..catalog import RECIPES, synthesize_instance
from ..exceptions import (ConfigError, DivergenceError, MonosplitError, OracleFailure)
from ..operators import certify, single_op_from_dict
from ..product_space import (CompositeProblem, check_residuals, primal_dual_solve,
                             synthesize_composite)
from .bench import RunConfig, load_problem, run_benchmark
from .oracle import oracle_solve

__all__ = ["main", "cli_main", "build_parser"]

logger = logging.getLogger("monosplit")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_ORACLE = 0, 1, 2, 3
_LOG_LEVELS = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags, which would read as divergence
    def error(self, message):
        raise _ArgError(message)


def _configure_logging():
    level = os.environ.get("MONOSPLIT_LOG", "off").strip().lower()
    if level not in _LOG_LEVELS:
        raise ConfigError(f"MONOSPLIT_LOG must be one of off, info, debug; got {level!r}")
    root = logging.getLogger("monosplit")
    root.setLevel(_LOG_LEVELS[level])
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)


def _lambda_arg(text):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"--lambda must be 'auto' or a number, got {text!r}") from None
    if not value > 0:
        raise ConfigError("--lambda must be positive")
    return value


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read_json(text):
    """JSON from a literal string or a file path."""
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise ConfigError(f"not a file or valid JSON: {text!r}") from None


def _cmd_gen(args):
    if args.kind == "composite":
        problem = synthesize_composite(args.seed, args.n, args.m, args.g)
    else:
        problem = synthesize_instance(args.seed, args.dim, args.kind)
    _dump(problem.to_dict(), args.out)
    return EXIT_OK


def _problem_from_args(args):
    if args.problem:
        return load_problem(args.problem)
    if args.dim is None:
        raise ConfigError("give --problem or --dim (with --seed and --kind)")
    return synthesize_instance(args.seed, args.dim, args.kind)


def _cmd_solve(args):
    if args.method not in METHODS:
        raise ConfigError(f"unknown method {args.method!r}; choose from {', '.join(METHODS)}")
    problem = _problem_from_args(args)
    ref = problem.known_solution
    if ref is None and (args.oracle or args.criterion == "dist-to-ref"):
        ref = oracle_solve(problem)
    stop = StoppingRule(args.tol, args.max_iters, args.criterion)
    lam = _lambda_arg(args.lam)
    try:
        x, trace = solve(problem, args.method, lam, stop, ref=ref)
    except DivergenceError as err:
        if args.trace and err.trace is not None:
            err.trace.to_csv(args.trace)
        raise
    if args.trace:
        trace.to_csv(args.trace)
    last = trace.last
    _dump({"method": args.method, "lambda": trace.lam, "iterations": last.k,
           "converged": trace.converged, "residual": last.residual,
           "dist_to_ref": last.dist_to_ref, "x": x.tolist()}, args.out)
    return EXIT_OK


def _cmd_bench(args):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.problem:
        source = args.problem
    elif args.dim is not None:
        source = {"seed": args.seed, "dim": args.dim, "kind": args.kind}
    else:
        raise ConfigError("give --problem or --dim (with --seed and --kind)")
    lam = _lambda_arg(args.lam)
    if args.shared_lambda is not None:
        lam = _lambda_arg(args.shared_lambda)
    config = RunConfig(problem_source=source, methods=methods, lambda_mode=lam,
                       tol=args.tol, max_iters=args.max_iters, seed=args.seed,
                       output_path=args.out_dir, format=args.format,
                       criterion=args.criterion, lambda_scale=args.lambda_scale,
                       use_oracle=args.oracle, wall_time=not args.no_wall_time,
                       n_jobs=args.jobs)
    summary = run_benchmark(config)
    for row in summary["rows"]:
        status = "diverged" if row["diverged"] else ("converged" if row["converged"] else "stopped")
        if row["error"] and not row["diverged"]:
            status = f"skipped ({row['error']})"
        print(f"{row['method']:>9}  lambda={row['lambda']:.4g}  iters={row['iterations']:>7}  "
              f"residual={row['final_residual']}  {status}")
    diverged = [r["method"] for r in summary["rows"] if r["diverged"]]
    if diverged:
        print(f"divergence in: {', '.join(diverged)}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_certify(args):
    if args.op is None:
        raise ConfigError("--op is required")
    op = single_op_from_dict(_read_json(args.op), args.dim)
    report = certify(op, n_samples=args.samples, seed=args.seed, dim=args.dim)
    _dump(report.to_dict())
    if not report.passed:
        print("certification probe failed", file=sys.stderr)
    return EXIT_OK


def _cmd_pd_solve(args):
    if args.problem:
        problem = CompositeProblem.from_dict(_read_json(args.problem))
    else:
        problem = synthesize_composite(args.seed, args.n, args.m, args.g)
    stop = StoppingRule(args.tol, args.max_iters, args.criterion)
    try:
        x, v, trace = primal_dual_solve(problem, stop)
    except DivergenceError as err:
        if args.trace and err.trace is not None:
            err.trace.to_csv(args.trace)
        raise
    if args.trace:
        trace.to_csv(args.trace)
    primal, dual = check_residuals(problem, x, v)
    _dump({"iterations": trace.last.k, "converged": trace.converged, "lambda": trace.lam,
           "primal_residual": primal, "dual_residuals": dual,
           "x": x.tolist(), "v": [vi.tolist() for vi in v]}, args.out)
    return EXIT_OK


def _add_stop_args(p, tol=1e-8, max_iters=100_000):
    p.add_argument("--tol", type=float, default=tol)
    p.add_argument("--max-iters", type=int, default=max_iters)
    p.add_argument("--criterion", choices=StoppingRule.CRITERIA, default="step-norm")


def _add_source_args(p):
    p.add_argument("--problem", help="problem JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int)
    p.add_argument("--kind", default="affine-interior", choices=sorted(RECIPES))


def build_parser():
    parser = _Parser(prog="monosplit", description="Three-operator monotone inclusion solvers.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthesized instance as JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--kind", default="affine-interior", choices=sorted(RECIPES) + ["composite"])
    p.add_argument("--n", type=int, default=2, help="primal dimension (composite)")
    p.add_argument("--m", type=int, default=1, help="number of dual blocks (composite)")
    p.add_argument("--g", type=int, default=2, help="dual block dimension (composite)")
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="run one method on one problem")
    _add_source_args(p)
    p.add_argument("--method", default="orfbs")
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--oracle", action="store_true", help="use the oracle as reference")
    p.add_argument("--trace", help="write the trace CSV here")
    p.add_argument("--out", help="write the result JSON here")
    _add_stop_args(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="run several methods on one problem")
    _add_source_args(p)
    p.add_argument("--methods", default="orfbs,fbhfs,sfrbs")
    p.add_argument("--lambda", dest="lam", default="auto",
                   help="'auto' uses each method's own step bound")
    p.add_argument("--shared-lambda", help="same step for every method")
    p.add_argument("--lambda-scale", type=float, default=1.0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--no-wall-time", action="store_true", help="leave wall_time_ns empty")
    p.add_argument("--jobs", type=int, default=1)
    _add_stop_args(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("certify", help="probe an operator's monotonicity and constants")
    p.add_argument("--op", help="operator JSON (literal or file path)")
    p.add_argument("--dim", type=int)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("pd-solve", help="solve a composite primal-dual instance")
    p.add_argument("--problem", help="composite problem JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--g", type=int, default=2)
    p.add_argument("--trace")
    p.add_argument("--out")
    _add_stop_args(p, max_iters=500_000)
    p.set_defaults(func=_cmd_pd_solve)
    return parser


def cli_main(argv=None):
    """Run the CLI and return its exit code."""
    try:
        _configure_logging()
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise _ArgError("a subcommand is required")
        return args.func(args)
    except _ArgError as err:
        print(f"monosplit: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"monosplit: divergence: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except OracleFailure as err:
        print(f"monosplit: oracle failure: {err}", file=sys.stderr)
        return EXIT_ORACLE
    except (MonosplitError, ValueError, OSError, KeyError, TypeError) as err:
        print(f"monosplit: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
