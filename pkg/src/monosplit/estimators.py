"""Estimator-style wrappers around the solvers.

Hyperparameters go to ``__init__`` and are exposed through ``get_params`` /
``set_params``; ``fit`` takes a problem instance (there is no data matrix)
and stores results in trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .algorithms import METHODS, StoppingRule, default_step_size, solve
from .catalog import ProblemInstance
from .exceptions import ContractViolation, InvalidParameter
from .product_space import CompositeProblem, check_residuals, primal_dual_solve
from .stepsize import StepSizePlan, plan_step_size

__all__ = ["SplittingSolver", "PrimalDualSolver"]


def _stop_rule(est):
    if not (isinstance(est.max_iter, (int, np.integer)) and est.max_iter >= 1):
        raise InvalidParameter(f"max_iter must be a positive integer, got {est.max_iter!r}")
    return StoppingRule(est.tol, int(est.max_iter), est.criterion)


class SplittingSolver(BaseEstimator):
    """Solve ``0 in Ax + Bx + Cx`` with one splitting method.

    Parameters
    ----------
    method : str, default="orfbs"
        Any name in :data:`monosplit.algorithms.METHODS`.
    step_size : "auto" or float, default="auto"
        ``"auto"`` picks the method's own theoretical step.
    eps : tuple of float, optional
        ``(eps1, eps2, eps3)`` override for the planned ``orfbs`` step.
    tol : float, default=1e-8
    max_iter : int, default=100000
    criterion : {"step-norm", "residual", "dist-to-ref"}, default="step-norm"

    Attributes
    ----------
    x_ : ndarray
        Final iterate.
    trace_ : IterationTrace
    n_iter_ : int
    step_size_ : float
    plan_ : StepSizePlan or None
        Certificate of the step when ``method="orfbs"`` and it was planned.
    converged_ : bool
    residual_ : float
        Fixed-point residual at ``x_`` with unit step.
    """

    def __init__(self, method="orfbs", step_size="auto", eps=None, tol=1e-8,
                 max_iter=100_000, criterion="step-norm"):
        self.method = method
        self.step_size = step_size
        self.eps = eps
        self.tol = tol
        self.max_iter = max_iter
        self.criterion = criterion

    def _plan(self, problem):
        if self.method not in METHODS:
            raise InvalidParameter(f"unknown method {self.method!r}")
        if self.eps is not None:
            if self.method != "orfbs":
                raise InvalidParameter("eps overrides only apply to method='orfbs'")
            return plan_step_size(problem.L, problem.beta, overrides=self.eps)
        if isinstance(self.step_size, str):
            if self.step_size != "auto":
                raise InvalidParameter(f"step_size must be 'auto' or a number, got {self.step_size!r}")
            return default_step_size(self.method, problem)
        lam = float(self.step_size)
        if not lam > 0:
            raise InvalidParameter("step_size must be positive")
        return lam

    def fit(self, problem, x0=None, x_minus1=None):
        """Run the solver on `problem` from ``(x0, x_minus1)``."""
        if not isinstance(problem, ProblemInstance):
            raise ContractViolation("fit expects a ProblemInstance")
        plan = self._plan(problem)
        x, trace = solve(problem, self.method, plan, _stop_rule(self), x0=x0, x_minus1=x_minus1)
        self.x_ = x
        self.trace_ = trace
        self.n_iter_ = trace.last.k
        self.plan_ = plan if isinstance(plan, StepSizePlan) else None
        self.step_size_ = trace.lam
        self.converged_ = trace.converged
        self.residual_ = problem.residual(x)
        return self

    def residual(self, problem):
        """Unit-step fixed-point residual of the fitted point on `problem`."""
        check_is_fitted(self, "x_")
        return problem.residual(self.x_)


class PrimalDualSolver(BaseEstimator):
    """Solve a composite primal-dual pair through the lifted iteration.

    Attributes
    ----------
    x_ : ndarray
    v_ : list of ndarray
    trace_ : IterationTrace
    n_iter_ : int
    plan_ : StepSizePlan
    residuals_ : tuple
        ``(primal, [dual_1, ...])`` from :func:`check_residuals`.
    """

    def __init__(self, step_size="auto", tol=1e-8, max_iter=500_000, criterion="step-norm"):
        self.step_size = step_size
        self.tol = tol
        self.max_iter = max_iter
        self.criterion = criterion

    def fit(self, problem, init=None):
        if not isinstance(problem, CompositeProblem):
            raise ContractViolation("fit expects a CompositeProblem")
        if isinstance(self.step_size, str) and self.step_size != "auto":
            raise InvalidParameter(f"step_size must be 'auto' or a number, got {self.step_size!r}")
        x, v, trace = primal_dual_solve(problem, _stop_rule(self), init=init, plan=self.step_size)
        self.x_, self.v_, self.trace_ = x, v, trace
        self.n_iter_ = trace.last.k
        self.step_size_ = trace.lam
        self.converged_ = trace.converged
        self.residuals_ = check_residuals(problem, x, v)
        return self
