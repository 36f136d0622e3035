"""Splitting solvers for three-operator monotone inclusions ``0 in Ax + Bx + Cx``.

``A`` is maximally monotone and accessed through its resolvent, ``B`` is
monotone and Lipschitz, ``C`` is cocoercive. The main solver is the outer
reflected forward-backward iteration

    x_{k+1} = J_{lam A}(x_k - lam B x_k - lam C x_k) - lam (B x_k - B x_{k-1})

which evaluates ``B`` and ``C`` once per step. Classical splittings are
included for comparison, together with a primal-dual lift for composite
inclusions with parallel sums.
"""

from .algorithms import METHODS, IterationTrace, StoppingRule, solve
from .catalog import (ProblemInstance, make_affine_monotone, make_ball_normal_cone,
                      make_box_normal_cone, make_l1_subdifferential, make_linear,
                      make_quadratic_gradient, make_scaled_identity, make_skew,
                      make_smooth, synthesize_instance)
from .estimators import PrimalDualSolver, SplittingSolver
from .exceptions import (ConfigError, ContractViolation, DivergenceError, InvalidParameter,
                         InvalidPlanError, MonosplitError, NumericError, OracleFailure)
from .operators import (apply, certify, inverse_resolvent_eval, resolvent_eval)
from .product_space import (CompositeBlock, CompositeProblem, LiftedPoint,
                            aggregate_constants, check_residuals, primal_dual_solve,
                            synthesize_composite)
from .stepsize import StepSizePlan, baseline_step_size, plan_step_size

__version__ = "0.1.0"

__all__ = [
    "METHODS", "IterationTrace", "StoppingRule", "solve", "ProblemInstance",
    "make_affine_monotone", "make_ball_normal_cone", "make_box_normal_cone",
    "make_l1_subdifferential", "make_linear", "make_quadratic_gradient",
    "make_scaled_identity", "make_skew", "make_smooth", "synthesize_instance",
    "SplittingSolver", "PrimalDualSolver", "ConfigError", "ContractViolation",
    "DivergenceError", "InvalidParameter", "InvalidPlanError", "MonosplitError",
    "NumericError", "OracleFailure", "apply", "certify", "inverse_resolvent_eval",
    "resolvent_eval", "CompositeBlock", "CompositeProblem", "LiftedPoint",
    "aggregate_constants", "check_residuals", "primal_dual_solve",
    "synthesize_composite", "StepSizePlan", "baseline_step_size", "plan_step_size",
]
