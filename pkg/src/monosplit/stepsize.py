"""Step-size selection.

:func:`plan_step_size` picks ``lam`` together with the auxiliary constants
``eps1, eps2, eps3`` that certify convergence of the outer reflected
forward-backward iteration for a monotone ``L``-Lipschitz ``B`` and a
``beta``-cocoercive ``C``:

    0 < lam <  (2 beta - eps2) eps1
    0 < lam <= (3 - eps3) eps2
    0 < lam <  (1/2 - eps1 - 1/eps3) / L

with ``eps1, eps2 > 0``, ``eps2 < 2 beta``, ``2 < eps3 < 3`` and
``eps1 + 1/eps3 < 1/2``. ``beta = inf`` (no cocoercive part) drops the first
bound and ``L = 0`` (no Lipschitz part) drops the third.

:func:`baseline_step_size` returns the textbook step for the comparison
methods.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameter, InvalidPlanError
from .validation import check_nonnegative, check_positive

__all__ = ["StepSizePlan", "plan_step_size", "baseline_step_size",
           "INEQUALITIES", "SAFETY", "DEFAULT_EPS3_GRID", "DEFAULT_GRID_STEPS"]

logger = logging.getLogger(__name__)

SAFETY = 0.99
DEFAULT_EPS3_GRID = tuple(round(2.0 + 0.05 * i, 2) for i in range(1, 20))
DEFAULT_GRID_STEPS = 50

# key -> human readable statement of the inequality
INEQUALITIES = {
    "eps1>0": "eps1 must be positive",
    "eps2>0": "eps2 must be positive",
    "eps2<2beta": "eps2 must be smaller than 2*beta",
    "eps3_range": "eps3 must lie in (2,3)",
    "eps1+1/eps3<1/2": "eps1 + 1/eps3 must be smaller than 1/2",
    "lambda>0": "lambda must be positive",
    "lambda<(2beta-eps2)eps1": "lambda must be smaller than (2*beta - eps2)*eps1",
    "lambda<=(3-eps3)eps2": "lambda must not exceed (3 - eps3)*eps2",
    "lambda<(1/2-eps1-1/eps3)/L": "lambda must be smaller than (1/2 - eps1 - 1/eps3)/L",
}


def eps_violations(eps1, eps2, eps3, beta):
    """Keys of the violated constraints on ``(eps1, eps2, eps3)`` alone."""
    bad = []
    if not eps1 > 0:
        bad.append("eps1>0")
    if not eps2 > 0:
        bad.append("eps2>0")
    if not (math.isinf(beta) or eps2 < 2 * beta):
        bad.append("eps2<2beta")
    if not 2 < eps3 < 3:
        bad.append("eps3_range")
    if not eps1 + 1.0 / eps3 < 0.5:
        bad.append("eps1+1/eps3<1/2")
    return bad


def lambda_bounds(eps1, eps2, eps3, L, beta):
    """The three upper bounds on ``lam``; ``inf`` marks a dropped bound."""
    b1 = math.inf if math.isinf(beta) else (2 * beta - eps2) * eps1
    b2 = (3 - eps3) * eps2
    b3 = math.inf if L == 0 else (0.5 - eps1 - 1.0 / eps3) / L
    return b1, b2, b3


@dataclass(frozen=True)
class StepSizePlan:
    """Step size ``lam`` with the constants that certify it.

    ``unconstrained`` is set when ``L = 0`` and ``beta = inf`` so that no
    bound is active and ``lam`` fell back to 1.
    """

    lam: float
    eps1: float
    eps2: float
    eps3: float
    L: float
    beta: float
    unconstrained: bool = False

    def violations(self):
        bad = eps_violations(self.eps1, self.eps2, self.eps3, self.beta)
        if not self.lam > 0:
            bad.append("lambda>0")
        b1, b2, b3 = lambda_bounds(self.eps1, self.eps2, self.eps3, self.L, self.beta)
        if not self.lam < b1:
            bad.append("lambda<(2beta-eps2)eps1")
        if not self.lam <= b2:
            bad.append("lambda<=(3-eps3)eps2")
        if not self.lam < b3:
            bad.append("lambda<(1/2-eps1-1/eps3)/L")
        return bad

    @property
    def is_valid(self):
        return not self.violations()

    def to_dict(self):
        return {"lambda": self.lam, "eps1": self.eps1, "eps2": self.eps2, "eps3": self.eps3,
                "L": self.L, "beta": None if math.isinf(self.beta) else self.beta,
                "unconstrained": self.unconstrained}


def _raise_violations(keys):
    raise InvalidPlanError([f"{k}: {INEQUALITIES[k]}" for k in keys])


def _lambda_for(eps1, eps2, eps3, L, beta, safety):
    b1, b2, b3 = lambda_bounds(eps1, eps2, eps3, L, beta)
    return min(safety * b1, b2, safety * b3)


def _grid_search(L, beta, eps3_grid, steps, safety):
    with np.errstate(over="ignore", divide="ignore"):
        return _grid_search_raw(L, beta, eps3_grid, steps, safety)


def _grid_search_raw(L, beta, eps3_grid, steps, safety):
    eps3 = np.asarray(eps3_grid, dtype=float)[:, None, None]
    frac = np.linspace(0.0, 1.0, steps + 2)[1:-1]
    eps1 = (0.5 - 1.0 / eps3) * frac[None, :, None]
    if math.isinf(beta):
        # eps2 is free: choose it so the (3 - eps3) eps2 bound never binds first
        b3 = (0.5 - eps1 - 1.0 / eps3) / L
        lam = safety * b3
        eps2 = lam / (3 - eps3)
        lam = np.broadcast_to(lam, (eps3.shape[0], steps, 1))
        eps2 = np.broadcast_to(eps2, lam.shape)
    else:
        eps2 = (2 * beta * frac)[None, None, :]
        lam = np.minimum(safety * (2 * beta - eps2) * eps1, (3 - eps3) * eps2)
        if L > 0:
            lam = np.minimum(lam, safety * (0.5 - eps1 - 1.0 / eps3) / L)
        eps2 = np.broadcast_to(eps2, lam.shape)
    i, j, k = np.unravel_index(int(np.argmax(lam)), lam.shape)
    e1 = float(np.broadcast_to(eps1, lam.shape)[i, j, k])
    e2 = float(eps2[i, j, k])
    e3 = float(eps3[i, 0, 0])
    return e1, e2, e3


def plan_step_size(L, beta, overrides=None, eps3_grid=DEFAULT_EPS3_GRID,
                   grid_steps=DEFAULT_GRID_STEPS, safety=SAFETY):
    """Choose a certified step size.

    Parameters
    ----------
    L : float
        Lipschitz constant of ``B`` (``0`` when ``B = 0``).
    beta : float
        Cocoercivity modulus of ``C`` (``math.inf`` when ``C`` is constant).
    overrides : tuple of float, optional
        ``(eps1, eps2, eps3)``. When given, the constants are validated and
        ``lam`` is set to the tightest bound, scaled by `safety` for the strict
        inequalities. Otherwise a grid over ``eps3`` in ``eps3_grid`` and
        `grid_steps` interior points for ``eps1`` and ``eps2`` is searched for
        the largest ``lam``.

    Returns
    -------
    StepSizePlan

    Raises
    ------
    InvalidPlanError
        If the overrides violate a constraint; ``violated`` lists every
        violated inequality.
    InvalidParameter
        If ``L`` is so small (subnormal) that the step bound overflows.
    """
    L = check_nonnegative(L, "L")
    beta = check_positive(beta, "beta", allow_inf=True)
    degenerate = L == 0 and math.isinf(beta)

    if overrides is not None:
        try:
            eps1, eps2, eps3 = (float(e) for e in overrides)
        except (TypeError, ValueError):
            raise InvalidParameter("overrides must be a triple (eps1, eps2, eps3)") from None
        bad = eps_violations(eps1, eps2, eps3, beta)
        if bad:
            _raise_violations(bad)
    elif degenerate:
        eps3 = 2.5
        eps1 = 0.5 * (0.5 - 1.0 / eps3)
        eps2 = 1.0 / (3 - eps3)
    else:
        eps1, eps2, eps3 = _grid_search(L, beta, eps3_grid, grid_steps, safety)

    if degenerate:
        logger.warning("L = 0 and beta = inf: no step-size bound is active, using lambda = 1")
        lam = min(1.0, (3 - eps3) * eps2)
    else:
        with np.errstate(over="ignore", divide="ignore"):
            lam = _lambda_for(eps1, eps2, eps3, L, beta, safety)
        if not math.isfinite(lam):
            raise InvalidParameter(f"step bound overflows for L={L!r}; pass L=0 for a zero B")
    plan = StepSizePlan(lam, eps1, eps2, eps3, L, beta, unconstrained=degenerate)
    bad = plan.violations()
    if bad:
        _raise_violations(bad)
    return plan


def baseline_step_size(method, L, beta, safety=SAFETY):
    """Textbook constant step for a comparison method.

    ============  =====================================
    fbs           ``2 beta``
    fbfs          ``1 / L``
    fbhfs         ``4 beta / (1 + sqrt(1 + 16 beta^2 L^2))``
    sfrbs, frbs   ``2 beta / (4 beta L + 1)``
    srfbs, rfbs   same as sfrbs (no closed form is published)
    csetnek2      ``1 / (3 L)``
    csetnek3      ``1 / (3 (L + 1/beta))``
    ============  =====================================

    All bounds are strict and scaled by `safety`. Degenerate limits
    (``L = 0`` or ``beta = inf``) are taken analytically; if no bound remains
    the step is 1.
    """
    L = check_nonnegative(L, "L")
    beta = check_positive(beta, "beta", allow_inf=True)
    inf_beta = math.isinf(beta)
    if method == "orfbs":
        return plan_step_size(L, beta).lam
    if method == "fbs":
        bound = math.inf if inf_beta else 2 * beta
    elif method == "fbfs":
        bound = math.inf if L == 0 else 1.0 / L
    elif method == "fbhfs":
        if inf_beta:
            bound = math.inf if L == 0 else 1.0 / L
        else:
            bound = 4 * beta / (1 + math.sqrt(1 + 16 * beta ** 2 * L ** 2))
    elif method in ("sfrbs", "frbs", "srfbs", "rfbs"):
        if inf_beta:
            bound = math.inf if L == 0 else 1.0 / (2 * L)
        else:
            bound = 2 * beta / (4 * beta * L + 1)
    elif method == "csetnek2":
        bound = math.inf if L == 0 else 1.0 / (3 * L)
    elif method == "csetnek3":
        lt = L + (0.0 if inf_beta else 1.0 / beta)
        bound = math.inf if lt == 0 else 1.0 / (3 * lt)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return 1.0 if math.isinf(bound) else safety * bound
