"""Splitting iterations for ``0 in Ax + Bx + Cx``.

The main scheme is the outer reflected forward-backward step (ORFBS)::

    x_{k+1} = J_{lam A}(x_k - lam B x_k - lam C x_k) - lam (B x_k - B x_{k-1})

where the reflection ``B x_k - B x_{k-1}`` is applied outside the resolvent.
The comparison schemes are implemented one step function each, written
directly from their update formulas:

=========  ==============================================================
fbs        ``J(x - lam C x)``
fbfs       ``u = J(x - lam B x)``; ``u + lam B x - lam B u``
fbhfs      ``u = J(x - lam (B + C) x)``; ``u + lam B x - lam B u``
sfrbs      ``J(x - 2 lam B x + lam B x_prev - lam C x)``
srfbs      ``J(x - lam B(2 x - x_prev) - lam C x)``
csetnek2   ``J(x - lam B x) - lam (B x - B x_prev)``
csetnek3   ``J(x - lam B x - lam C x) - lam ((B+C) x - (B+C) x_prev)``
=========  ==============================================================

``frbs`` and ``rfbs`` are ``sfrbs`` / ``srfbs`` on problems with ``C = 0``.
"""

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .catalog import ProblemInstance, fixed_point_residual
from .exceptions import ContractViolation, DivergenceError, InvalidParameter
from .stepsize import StepSizePlan, baseline_step_size, plan_step_size
from .validation import check_point, check_positive

__all__ = [
    "SolverState", "StoppingRule", "TraceRecord", "IterationTrace", "METHODS",
    "init_state", "orfbs_step", "fbs_step", "fbfs_step", "fbhfs_step",
    "sfrbs_step", "frbs_step", "srfbs_step", "rfbs_step", "csetnek2_step",
    "csetnek3_step", "solve", "lyapunov_value", "diagnostics_update",
    "default_step_size", "DIVERGENCE_BOUND", "CSV_COLUMNS",
]

logger = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e12
CSV_COLUMNS = ("k", "residual", "step_norm", "dist_to_ref", "lyapunov", "cum_c_err", "wall_time_ns")


@dataclass(frozen=True)
class SolverState:
    """Iterate pair ``(x_k, x_{k-1})`` with the cached ``B x_{k-1}``.

    ``c_prev`` caches ``C x_{k-1}`` for the one scheme that needs it
    (csetnek3) and is ``None`` otherwise.
    """

    x_curr: np.ndarray
    x_prev: np.ndarray
    b_prev: np.ndarray
    k: int = 0
    c_prev: Optional[np.ndarray] = None


def init_state(problem, x0=None, x_minus1=None):
    """Initial state; ``x0`` defaults to zero and ``x_{-1}`` to ``x0``."""
    n = problem.dim
    x0 = np.zeros(n) if x0 is None else check_point(x0, n, "x0")
    x_minus1 = x0.copy() if x_minus1 is None else check_point(x_minus1, n, "x_minus1")
    return SolverState(x0.copy(), x_minus1, problem.B.apply(x_minus1), 0)


def _guard(x, k):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_BOUND:
        raise DivergenceError(k, f"iterate x_{k} left the finite region")
    return x


def _check_step_args(state, problem, lam):
    if state.x_curr.shape != (problem.dim,):
        raise ContractViolation(f"state has dim {state.x_curr.shape}, problem has dim {problem.dim}")
    if not lam > 0:
        raise InvalidParameter(f"lambda must be positive, got {lam}")


def _advance(state, x_new, b_curr, c_curr=None):
    k = state.k + 1
    return SolverState(_guard(x_new, k), state.x_curr, b_curr, k, c_curr)


def orfbs_step(state, problem, lam):
    """One outer reflected forward-backward step.

    Evaluates ``B``, ``C`` and ``J_{lam A}`` exactly once each.
    """
    _check_step_args(state, problem, lam)
    x = state.x_curr
    with np.errstate(over="ignore", invalid="ignore"):
        b = problem.B._eval(x)
        c = problem.C._eval(x)
        u = problem.A._resolve(x - lam * b - lam * c, lam)
        x_new = u - lam * (b - state.b_prev)
    return _advance(state, x_new, b)


def fbs_step(state, problem, lam):
    """Forward-backward step ``J(x - lam C x)``; ``B`` is ignored."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = problem.A._resolve(x - lam * problem.C._eval(x), lam)
    return _advance(state, x_new, state.b_prev if problem.B.is_zero else problem.B._eval(x))


def fbfs_step(state, problem, lam):
    """Tseng's forward-backward-forward step; ``C`` is ignored."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    B = problem.B
    with np.errstate(over="ignore", invalid="ignore"):
        b = B._eval(x)
        u = problem.A._resolve(x - lam * b, lam)
        x_new = u + lam * b - lam * B._eval(u)
    return _advance(state, x_new, b)


def fbhfs_step(state, problem, lam):
    """Forward-backward-half-forward step."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    B = problem.B
    with np.errstate(over="ignore", invalid="ignore"):
        b = B._eval(x)
        u = problem.A._resolve(x - lam * (b + problem.C._eval(x)), lam)
        x_new = u + lam * b - lam * B._eval(u)
    return _advance(state, x_new, b)


def sfrbs_step(state, problem, lam):
    """Semi-forward-reflected-backward step."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    with np.errstate(over="ignore", invalid="ignore"):
        b = problem.B._eval(x)
        x_new = problem.A._resolve(
            x - 2 * lam * b + lam * state.b_prev - lam * problem.C._eval(x), lam)
    return _advance(state, x_new, b)


def srfbs_step(state, problem, lam):
    """Semi-reflected forward-backward step (``B`` at the reflected point)."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    B = problem.B
    with np.errstate(over="ignore", invalid="ignore"):
        x_new = problem.A._resolve(
            x - lam * B._eval(2 * x - state.x_prev) - lam * problem.C._eval(x), lam)
        b = B._eval(x)
    return _advance(state, x_new, b)


def csetnek2_step(state, problem, lam):
    """Two-operator outer-reflected step ``J(x - lam Bx) - lam (Bx - Bx_prev)``; ``C`` ignored."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    with np.errstate(over="ignore", invalid="ignore"):
        b = problem.B._eval(x)
        x_new = problem.A._resolve(x - lam * b, lam) - lam * (b - state.b_prev)
    return _advance(state, x_new, b)


def csetnek3_step(state, problem, lam):
    """The two-operator scheme applied with ``B + C`` as the Lipschitz part."""
    _check_step_args(state, problem, lam)
    x = state.x_curr
    C = problem.C
    with np.errstate(over="ignore", invalid="ignore"):
        b = problem.B._eval(x)
        c = C._eval(x)
        c_prev = state.c_prev if state.c_prev is not None else C._eval(state.x_prev)
        x_new = (problem.A._resolve(x - lam * b - lam * c, lam)
                 - lam * ((b + c) - (state.b_prev + c_prev)))
    return _advance(state, x_new, b, c)


frbs_step = sfrbs_step
rfbs_step = srfbs_step

STEPS = {
    "orfbs": orfbs_step,
    "fbs": fbs_step,
    "fbfs": fbfs_step,
    "fbhfs": fbhfs_step,
    "sfrbs": sfrbs_step,
    "frbs": frbs_step,
    "srfbs": srfbs_step,
    "rfbs": rfbs_step,
    "csetnek2": csetnek2_step,
    "csetnek3": csetnek3_step,
}
METHODS = tuple(STEPS)

# methods that silently drop an operator must only see problems where it vanishes
_NEEDS_ZERO_B = {"fbs"}
_NEEDS_ZERO_C = {"fbfs", "frbs", "rfbs", "csetnek2"}


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class StoppingRule:
    """Stop when ``criterion`` drops to ``tol`` or after ``max_iters`` steps.

    ``criterion`` is one of ``"step-norm"``, ``"residual"``, ``"dist-to-ref"``.
    """

    tol: float = 1e-8
    max_iters: int = 100_000
    criterion: str = "step-norm"

    CRITERIA = ("step-norm", "residual", "dist-to-ref")

    def __post_init__(self):
        check_positive(self.tol, "tol")
        if int(self.max_iters) < 1:
            raise InvalidParameter("max_iters must be >= 1")
        self.max_iters = int(self.max_iters)
        if self.criterion not in self.CRITERIA:
            raise InvalidParameter(f"unknown stopping criterion {self.criterion!r}")


class TraceRecord(NamedTuple):
    k: int
    residual: float
    step_norm: float
    dist_to_ref: Optional[float]
    lyapunov: Optional[float]
    cum_c_err: Optional[float]
    wall_time_ns: int


@dataclass
class IterationTrace:
    """Per-iteration diagnostics of one solver run."""

    method: str = "orfbs"
    lam: float = float("nan")
    records: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    _ref_cache: tuple = field(default=None, repr=False)
    _start_ns: int = field(default_factory=time.perf_counter_ns, repr=False)

    def __len__(self):
        return len(self.records)

    @property
    def last(self):
        return self.records[-1] if self.records else None

    @property
    def n_iter(self):
        return self.records[-1].k if self.records else 0

    def column(self, name):
        """Column as a float array; missing values become NaN."""
        idx = TraceRecord._fields.index(name)
        return np.array([np.nan if r[idx] is None else r[idx] for r in self.records], dtype=float)

    def to_csv(self, path=None, wall_time=True):
        """Write the trace as CSV; returns the text when ``path`` is None.

        ``wall_time=False`` leaves the ``wall_time_ns`` column empty so that
        reruns are byte-identical.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([r.k, repr(r.residual), repr(r.step_norm),
                             "" if r.dist_to_ref is None else repr(r.dist_to_ref),
                             "" if r.lyapunov is None else repr(r.lyapunov),
                             "" if r.cum_c_err is None else repr(r.cum_c_err),
                             r.wall_time_ns if wall_time else ""])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def lyapunov_value(state, ref_x, ref_Bx, lam):
    """``|(x_k + lam B x_{k-1}) - (x* + lam B x*)|^2 + |x_k - x_{k-1}|^2 / 2``."""
    a = state.x_curr + lam * state.b_prev - (ref_x + lam * ref_Bx)
    d = state.x_curr - state.x_prev
    return float(np.dot(a, a) + 0.5 * np.dot(d, d))


def _step_of(plan):
    if isinstance(plan, StepSizePlan):
        return plan.lam
    return check_positive(plan, "lambda")


def diagnostics_update(trace, state, problem, plan, ref=None):
    """Append the record for ``state`` to ``trace`` and return the trace.

    With a reference point the record also carries the distance to it, the
    Lyapunov value and the running sum of ``|C x_k - C x*|^2``.
    """
    lam = _step_of(plan)
    x = state.x_curr
    residual = fixed_point_residual(problem.A, problem.B, problem.C, lam, x)
    step_norm = float(np.linalg.norm(x - state.x_prev))
    dist = lyap = cum = None
    if ref is not None:
        if trace._ref_cache is None or trace._ref_cache[0] is not ref:
            trace._ref_cache = (ref, problem.B._eval(ref), problem.C._eval(ref))
        _, ref_b, ref_c = trace._ref_cache
        dist = float(np.linalg.norm(x - ref))
        lyap = lyapunov_value(state, ref, ref_b, lam)
        dc = problem.C._eval(x) - ref_c
        prev = trace.records[-1].cum_c_err if trace.records else None
        cum = (prev or 0.0) + float(np.dot(dc, dc))
    trace.records.append(TraceRecord(state.k, residual, step_norm, dist, lyap, cum,
                                     time.perf_counter_ns() - trace._start_ns))
    return trace


def default_step_size(method, problem):
    """Theory-backed step for ``method`` on ``problem``."""
    if method == "orfbs":
        return plan_step_size(problem.L, problem.beta)
    return baseline_step_size(method, problem.L, problem.beta)


def _check_method(method, problem):
    if method not in STEPS:
        raise InvalidParameter(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if method in _NEEDS_ZERO_B and not problem.B.is_zero:
        raise ContractViolation(f"method {method!r} ignores B and needs B = 0")
    if method in _NEEDS_ZERO_C and not problem.C.is_zero:
        raise ContractViolation(f"method {method!r} ignores C and needs C = 0")


def _stop_value(record, criterion):
    if criterion == "step-norm":
        return record.step_norm
    if criterion == "residual":
        return record.residual
    return record.dist_to_ref


def solve(problem, method="orfbs", plan="auto", stop=None, x0=None, x_minus1=None,
          ref=None, callback=None):
    """Run a splitting method until the stopping rule fires.

    Parameters
    ----------
    problem : ProblemInstance
    method : str
        One of :data:`METHODS`.
    plan : StepSizePlan, float or "auto"
        Step size. ``"auto"`` uses :func:`default_step_size`.
    stop : StoppingRule, optional
    x0, x_minus1 : array_like, optional
        Starting pair; ``x0`` defaults to zero and ``x_minus1`` to ``x0``.
    ref : array_like, optional
        Reference solution for distance / Lyapunov diagnostics. Defaults to
        ``problem.known_solution``.
    callback : callable, optional
        Called as ``callback(state, record)`` after every step.

    Returns
    -------
    x : ndarray
        Last iterate.
    trace : IterationTrace

    Raises
    ------
    DivergenceError
        When an iterate becomes non-finite or exceeds 1e12 in magnitude. The
        partial trace is attached as ``err.trace``.
    """
    if not isinstance(problem, ProblemInstance):
        raise ContractViolation("problem must be a ProblemInstance")
    _check_method(method, problem)
    if isinstance(plan, str):
        if plan != "auto":
            raise InvalidParameter(f"plan must be 'auto', a float or a StepSizePlan, got {plan!r}")
        plan = default_step_size(method, problem)
    lam = _step_of(plan)
    stop = StoppingRule() if stop is None else stop
    if ref is None:
        ref = problem.known_solution
    else:
        ref = check_point(ref, problem.dim, "ref")
    if stop.criterion == "dist-to-ref" and ref is None:
        raise ContractViolation("dist-to-ref stopping needs a reference point")

    step = STEPS[method]
    state = init_state(problem, x0, x_minus1)
    trace = IterationTrace(method=method, lam=lam)
    diagnostics_update(trace, state, problem, lam, ref)
    try:
        for _ in range(stop.max_iters):
            state = step(state, problem, lam)
            diagnostics_update(trace, state, problem, lam, ref)
            if callback is not None:
                callback(state, trace.last)
            if _stop_value(trace.last, stop.criterion) <= stop.tol:
                trace.converged = True
                break
    except DivergenceError as err:
        trace.diverged = True
        err.trace = trace
        logger.info("%s diverged at k=%d (lambda=%g)", method, err.iteration, lam)
        raise
    logger.debug("%s finished after %d iterations (converged=%s)", method, trace.n_iter, trace.converged)
    return state.x_curr, trace
