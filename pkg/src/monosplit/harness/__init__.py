"""Experiment tooling: reference oracle, benchmark sweeps and the CLI."""

from .bench import RunConfig, load_problem, run_benchmark
from .oracle import oracle_solve

__all__ = ["RunConfig", "load_problem", "run_benchmark", "oracle_solve"]
