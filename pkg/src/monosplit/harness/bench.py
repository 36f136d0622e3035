"""Multi-method benchmark sweeps with CSV trace output."""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..algorithms import METHODS, StoppingRule, default_step_size, solve
from ..catalog import ProblemInstance, synthesize_instance
from ..exceptions import ConfigError, ContractViolation, DivergenceError
from ..stepsize import StepSizePlan
from .oracle import oracle_solve

__all__ = ["RunConfig", "run_benchmark", "load_problem"]

logger = logging.getLogger(__name__)


def load_problem(source):
    """Problem from a JSON path, a dict, a generator description or an instance.

    A generator description is ``{"seed": s, "dim": n, "kind": recipe}``.
    """
    if isinstance(source, ProblemInstance):
        return source
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            source = json.load(fh)
    if isinstance(source, dict):
        if "A" in source:
            return ProblemInstance.from_dict(source)
        if "dim" in source:
            return synthesize_instance(source.get("seed", 0), source["dim"],
                                       source.get("kind", "affine-interior"))
    raise ConfigError(f"cannot build a problem from {source!r}")


@dataclass
class RunConfig:
    """Benchmark configuration.

    ``lambda_mode`` is ``"auto"`` (each method's own theoretical step) or a
    float shared by every method. ``lambda_scale`` multiplies whichever step
    is chosen, which is how oversized steps are provoked on purpose.
    """

    problem_source: Union[str, dict, ProblemInstance]
    methods: list
    lambda_mode: Union[str, float] = "auto"
    tol: float = 1e-8
    max_iters: int = 100_000
    seed: int = 0
    output_path: str = "bench_out"
    format: str = "csv"
    criterion: str = "step-norm"
    lambda_scale: float = 1.0
    use_oracle: bool = False
    wall_time: bool = True
    n_jobs: int = 1
    x0: list = field(default=None)

    def validate(self):
        if not self.methods:
            raise ConfigError("methods must be a non-empty list")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(map(str, unknown))}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods must not repeat")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be positive")
        if int(self.max_iters) < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.lambda_mode != "auto":
            try:
                if float(self.lambda_mode) <= 0:
                    raise ValueError
            except (TypeError, ValueError):
                raise ConfigError(f"lambda must be 'auto' or a positive number, got {self.lambda_mode!r}") from None
        if not self.lambda_scale > 0:
            raise ConfigError("lambda_scale must be positive")
        if self.criterion not in StoppingRule.CRITERIA:
            raise ConfigError(f"unknown stopping criterion {self.criterion!r}")
        return self


def _trace_json(trace):
    return json.dumps({"method": trace.method, "lambda": trace.lam,
                       "records": [r._asdict() for r in trace.records]}, indent=1)


def _run_one(problem, method, config, ref, x0):
    if config.lambda_mode == "auto":
        base = default_step_size(method, problem)
        lam = base.lam if isinstance(base, StepSizePlan) else base
    else:
        lam = float(config.lambda_mode)
    lam *= config.lambda_scale
    stop = StoppingRule(config.tol, config.max_iters, config.criterion)
    row = {"method": method, "lambda": lam, "iterations": 0, "converged": False,
           "diverged": False, "final_residual": None, "final_dist": None,
           "wall_time_s": None, "error": None}
    trace = None
    try:
        _, trace = solve(problem, method, lam, stop, x0=x0, ref=ref)
    except DivergenceError as err:
        trace = err.trace
        row["diverged"] = True
        row["error"] = f"diverged at k={err.iteration}"
    except ContractViolation as err:
        row["error"] = str(err)
    if trace is not None and trace.records:
        last = trace.last
        row.update(iterations=last.k, converged=trace.converged,
                   final_residual=last.residual, final_dist=last.dist_to_ref,
                   wall_time_s=last.wall_time_ns * 1e-9)
    return row, trace


def run_benchmark(config):
    """Run every configured method on one problem and write the results.

    Writes ``trace_<method>.csv`` (or ``.json``) per method plus
    ``summary.json`` into ``config.output_path``. Divergence of one method is
    recorded in its summary row and does not stop the sweep.

    Returns
    -------
    dict
        The summary that was written to ``summary.json``.
    """
    config.validate()
    problem = load_problem(config.problem_source)
    ref = problem.known_solution
    if ref is None and (config.use_oracle or config.criterion == "dist-to-ref"):
        ref = oracle_solve(problem)
    x0 = None if config.x0 is None else np.asarray(config.x0, dtype=float)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(lambda m: _run_one(problem, m, config, ref, x0), config.methods))
    else:
        results = [_run_one(problem, m, config, ref, x0) for m in config.methods]

    os.makedirs(config.output_path, exist_ok=True)
    rows = []
    for row, trace in results:
        if trace is not None:
            name = f"trace_{row['method']}.{config.format}"
            path = os.path.join(config.output_path, name)
            if config.format == "csv":
                trace.to_csv(path, wall_time=config.wall_time)
            else:
                with open(path, "w") as fh:
                    fh.write(_trace_json(trace))
            row["trace_file"] = name
        rows.append(row)
    summary = {"problem": dict(problem.meta), "dim": problem.dim, "seed": config.seed,
               "tol": config.tol, "criterion": config.criterion, "rows": rows}
    with open(os.path.join(config.output_path, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary
