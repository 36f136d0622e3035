"""Closed-form operator constructors and planted test problems.

The ``make_*`` helpers pair each operator with its analytic constants so that
:func:`monosplit.operators.certify` passes on them. :func:`synthesize_instance`
draws a random three-operator problem ``0 in Ax + Bx + Cx`` whose solution is
known exactly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractViolation, InvalidParameter
from .operators import (AffineMonotoneOp, BallNormalCone, BoxNormalCone,
                        ComponentwiseSmooth, L1Subdifferential, MatrixMap,
                        ScaledIdentity, SetValuedOp, SingleValuedOp, ZeroMap,
                        ZeroSetOp, set_op_from_dict, single_op_from_dict,
                        spectral_norm)
from .validation import check_matrix, check_point, check_positive

__all__ = [
    "make_box_normal_cone", "make_ball_normal_cone", "make_l1_subdifferential",
    "make_affine_monotone", "make_skew", "make_quadratic_gradient",
    "make_scaled_identity", "make_smooth", "make_linear", "ProblemInstance",
    "synthesize_instance", "RECIPES", "fixed_point_residual",
]

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10


def make_box_normal_cone(lo, hi):
    """Normal cone of ``[lo, hi]``; rejects ``lo > hi`` in any coordinate."""
    return BoxNormalCone(lo, hi)


def make_ball_normal_cone(center, radius):
    return BallNormalCone(center, radius)


def make_l1_subdifferential(weight, dim=None):
    """``weight * d|.|_1``; its resolvent soft-thresholds at ``lam * weight``."""
    return L1Subdifferential(weight, dim)


def make_affine_monotone(m, b=None):
    return AffineMonotoneOp(m, b)


def make_skew(m):
    """Skew-symmetric linear map ``x -> M x``.

    Monotone (``<x, Mx> = 0``) with Lipschitz constant ``|M|_2``, and never
    cocoercive unless ``M = 0``.
    """
    m = check_matrix(m, "M")
    if np.max(np.abs(m + m.T)) > SYMMETRY_TOL:
        raise InvalidParameter("M is not skew-symmetric: |M + M^T|_max exceeds 1e-12")
    return MatrixMap(m, kind="skew", lipschitz=spectral_norm(m))


def make_quadratic_gradient(q, b=None):
    """Gradient ``x -> Q x + b`` of ``x^T Q x / 2 + b^T x`` for symmetric PSD ``Q``.

    Cocoercive with modulus ``1 / lambda_max(Q)``; for ``Q = 0`` the map is
    constant and gets the ``beta = inf`` sentinel.
    """
    q = check_matrix(q, "Q")
    if np.max(np.abs(q - q.T)) > SYMMETRY_TOL:
        raise InvalidParameter("Q is not symmetric")
    eig = np.linalg.eigvalsh(q)
    if eig[0] < -PSD_TOL:
        raise InvalidParameter(f"Q is indefinite: min eigenvalue {eig[0]:.3e}")
    lam_max = max(float(eig[-1]), 0.0)
    if lam_max == 0.0 or not np.any(q):
        return MatrixMap(q, b, kind="quad_grad", lipschitz=0.0, cocoercivity=math.inf)
    return MatrixMap(q, b, kind="quad_grad", lipschitz=lam_max, cocoercivity=1.0 / lam_max)


def make_linear(m, b=None, lipschitz=None, cocoercivity=None):
    """General monotone matrix map; Lipschitz defaults to ``|M|_2``."""
    m = check_matrix(m, "M")
    sym_min = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
    if sym_min < -PSD_TOL:
        raise InvalidParameter(f"linear map is not monotone: min eigenvalue of sym(M) is {sym_min:.3e}")
    return MatrixMap(m, b, kind="linear" if b is None else "affine",
                     lipschitz=spectral_norm(m) if lipschitz is None else lipschitz,
                     cocoercivity=cocoercivity)


def make_scaled_identity(factor, dim=None):
    return ScaledIdentity(factor, dim)


def make_smooth(fn="tanh", scale=1.0, center=None, dim=None):
    return ComponentwiseSmooth(fn, scale, center, dim)


def fixed_point_residual(A, B, C, lam, x):
    """``|x - J_{lam A}(x - lam Bx - lam Cx)|``; zero exactly at solutions."""
    return float(np.linalg.norm(x - A._resolve(x - lam * B._eval(x) - lam * C._eval(x), lam)))


@dataclass
class ProblemInstance:
    """Three-operator inclusion ``0 in Ax + Bx + Cx`` on ``R^dim``.

    Parameters
    ----------
    A : SetValuedOp
        Maximally monotone part, used only through its resolvent.
    B : SingleValuedOp
        Monotone and Lipschitz.
    C : SingleValuedOp
        Cocoercive (or the zero map).
    dim : int
    known_solution : ndarray, optional
        Planted solution; checked to satisfy the inclusion at construction.
    """

    A: SetValuedOp
    B: SingleValuedOp
    C: SingleValuedOp
    dim: int
    known_solution: np.ndarray = None
    meta: dict = field(default_factory=dict)

    SOLUTION_TOL = 1e-8

    def __post_init__(self):
        if not isinstance(self.A, SetValuedOp):
            raise ContractViolation("A must be a SetValuedOp")
        for name in ("B", "C"):
            if not isinstance(getattr(self, name), SingleValuedOp):
                raise ContractViolation(f"{name} must be a SingleValuedOp")
        self.dim = int(self.dim)
        for name, op in (("A", self.A), ("B", self.B), ("C", self.C)):
            if op.dim is not None and op.dim != self.dim:
                raise ContractViolation(f"{name} has dim {op.dim}, problem has dim {self.dim}")
        if self.B.lipschitz is None:
            raise ContractViolation("B must declare a Lipschitz constant")
        if not self.C.is_zero and self.C.cocoercivity is None:
            raise ContractViolation("C must declare a cocoercivity modulus")
        if self.known_solution is not None:
            self.known_solution = check_point(self.known_solution, self.dim, "known_solution")
            res = self.residual(self.known_solution)
            if res > self.SOLUTION_TOL:
                raise ContractViolation(f"known_solution has inclusion residual {res:.3e}")

    @property
    def L(self):
        return float(self.B.lipschitz)

    @property
    def beta(self):
        if self.C.is_zero:
            return math.inf
        return float(self.C.cocoercivity)

    def residual(self, x, lam=1.0):
        return fixed_point_residual(self.A, self.B, self.C, lam, check_point(x, self.dim))

    def to_dict(self):
        d = {"dim": self.dim, "A": self.A.to_dict(), "B": self.B.to_dict(), "C": self.C.to_dict()}
        if self.known_solution is not None:
            d["known_solution"] = self.known_solution.tolist()
        if self.meta:
            d["meta"] = dict(self.meta)
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            dim = int(d["dim"])
            return cls(A=set_op_from_dict(d["A"], dim), B=single_op_from_dict(d["B"], dim),
                       C=single_op_from_dict(d["C"], dim), dim=dim,
                       known_solution=d.get("known_solution"), meta=d.get("meta", {}))
        except KeyError as exc:
            raise InvalidParameter(f"problem description is missing key {exc}") from None


# ---------------------------------------------------------------------------
# Planted instances
# ---------------------------------------------------------------------------


def _random_skew(rng, n, norm):
    if n < 2:
        return np.zeros((n, n))
    g = rng.standard_normal((n, n))
    s = g - g.T
    return s * (norm / spectral_norm(s))


def _random_spd(rng, n, lo=0.5, hi=1.0):
    u, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = rng.uniform(lo, hi, n)
    eig[0] = hi
    q = (u * eig) @ u.T
    return 0.5 * (q + q.T)


def _box_around(rng, x_star, n):
    lo = x_star - rng.uniform(0.5, 1.5, n)
    hi = x_star + rng.uniform(0.5, 1.5, n)
    return lo, hi


def _recipe_affine_interior(rng, n):
    x_star = rng.uniform(-2, 2, n)
    B = make_skew(_random_skew(rng, n, rng.uniform(0.5, 1.0)))
    q = _random_spd(rng, n)
    b = -(B._eval(x_star) + q @ x_star)
    return make_box_normal_cone(*_box_around(rng, x_star, n)), B, make_quadratic_gradient(q, b), x_star


def _recipe_box_active(rng, n):
    lo = rng.uniform(-2, -0.5, n)
    hi = rng.uniform(0.5, 2, n)
    x_star = rng.uniform(0.8 * lo, 0.8 * hi)
    state = rng.integers(0, 3, n)  # 0 free, 1 at lo, 2 at hi
    x_star[state == 1] = lo[state == 1]
    x_star[state == 2] = hi[state == 2]
    # -F(x*) must lie in the normal cone: F_i > 0 at lo, F_i < 0 at hi, F_i = 0 inside
    target = np.zeros(n)
    target[state == 1] = rng.uniform(0.2, 1.0, int(np.sum(state == 1)))
    target[state == 2] = -rng.uniform(0.2, 1.0, int(np.sum(state == 2)))
    B = make_skew(_random_skew(rng, n, rng.uniform(0.5, 1.0)))
    q = _random_spd(rng, n)
    b = target - B._eval(x_star) - q @ x_star
    return make_box_normal_cone(lo, hi), B, make_quadratic_gradient(q, b), x_star


def _l1_plant(rng, n, weight):
    x_star = rng.uniform(-2, 2, n)
    zero = rng.random(n) < 0.4
    x_star[zero] = 0.0
    # need -F(x*) in weight * d|x*|_1
    target = -weight * np.sign(x_star)
    target[zero] = rng.uniform(-0.5 * weight, 0.5 * weight, int(np.sum(zero)))
    return x_star, target


def _recipe_l1_lasso_like(rng, n):
    weight = rng.uniform(0.2, 1.0)
    x_star, target = _l1_plant(rng, n, weight)
    q = _random_spd(rng, n)
    b = target - q @ x_star
    return make_l1_subdifferential(weight, n), ZeroMap(n), make_quadratic_gradient(q, b), x_star


def _recipe_l1_skew(rng, n):
    weight = rng.uniform(0.2, 1.0)
    x_star, target = _l1_plant(rng, n, weight)
    B = make_skew(_random_skew(rng, n, rng.uniform(0.5, 1.0)))
    q = _random_spd(rng, n)
    b = target - B._eval(x_star) - q @ x_star
    return make_l1_subdifferential(weight, n), B, make_quadratic_gradient(q, b), x_star


def _recipe_smooth_interior(rng, n):
    x_star = rng.uniform(-2, 2, n)
    B = make_smooth("tanh", rng.uniform(0.5, 1.0), center=rng.uniform(-1, 1, n))
    q = _random_spd(rng, n)
    b = -(B._eval(x_star) + q @ x_star)
    return make_box_normal_cone(*_box_around(rng, x_star, n)), B, make_quadratic_gradient(q, b), x_star


def _recipe_no_cocoercive(rng, n):
    # C = 0; B carries a strongly monotone symmetric part so the solution is unique
    lo = rng.uniform(-2, -0.5, n)
    hi = rng.uniform(0.5, 2, n)
    x_star = rng.uniform(0.5 * lo, 0.5 * hi)
    m = _random_skew(rng, n, rng.uniform(0.3, 0.8)) + _random_spd(rng, n, 0.3, 0.6)
    B = make_linear(m, -(m @ x_star))
    return make_box_normal_cone(lo, hi), B, ZeroMap(n), x_star


def _recipe_no_lipschitz(rng, n):
    x_star = rng.uniform(-2, 2, n)
    q = _random_spd(rng, n)
    lo, hi = _box_around(rng, x_star, n)
    return make_box_normal_cone(lo, hi), ZeroMap(n), make_quadratic_gradient(q, -(q @ x_star)), x_star


def _recipe_zero(rng, n):
    return ZeroSetOp(n), ZeroMap(n), ZeroMap(n), np.zeros(n)


RECIPES = {
    "affine-interior": _recipe_affine_interior,
    "box-active": _recipe_box_active,
    "l1-lasso-like": _recipe_l1_lasso_like,
    "l1-skew": _recipe_l1_skew,
    "smooth-interior": _recipe_smooth_interior,
    "no-cocoercive": _recipe_no_cocoercive,
    "no-lipschitz": _recipe_no_lipschitz,
    "zero": _recipe_zero,
}


def synthesize_instance(seed, dim, kind="affine-interior"):
    """Draw a planted :class:`ProblemInstance`.

    Parameters
    ----------
    seed : int
    dim : int
    kind : str
        One of :data:`RECIPES`. ``affine-interior`` puts ``x*`` strictly inside
        a box (so ``A(x*) = {0}``) with a skew ``B`` and a quadratic-gradient
        ``C`` whose constant term is shifted to make ``Bx* + Cx* = 0``.
    """
    if kind not in RECIPES:
        raise InvalidParameter(f"unknown recipe {kind!r}; choose from {sorted(RECIPES)}")
    if int(dim) < 1:
        raise InvalidParameter("dim must be >= 1")
    dim = int(dim)
    rng = np.random.default_rng([int(seed) % 2**63, dim, sorted(RECIPES).index(kind)])
    A, B, C, x_star = RECIPES[kind](rng, dim)
    return ProblemInstance(A, B, C, dim, known_solution=x_star,
                           meta={"recipe": kind, "seed": int(seed)})
