"""Primal-dual lift for composite inclusions with parallel sums.

Primal problem on ``R^n``::

    z in Ax + sum_i L_i^T ((B_i [] D_i [] C_i)(L_i x - r_i)) + Bx + Cx

with its dual in ``v_i``. On the product space ``K = R^n x R^{g_1} x ...`` the
pair becomes ``0 in M p + Q p + R p`` with

* ``M(x, v) = (-z + Ax, r_1 + B_1^{-1} v_1, ...)`` -- maximally monotone,
* ``Q(x, v) = (Bx + sum L_i^T v_i, -L_1 x + D_1^{-1} v_1, ...)`` -- monotone,
  ``L_bar``-Lipschitz,
* ``R(x, v) = (Cx, C_1^{-1} v_1, ...)`` -- ``beta_bar``-cocoercive,

and the outer reflected forward-backward iteration applies verbatim.

Each block stores ``D_i^{-1}`` and ``C_i^{-1}`` directly as single-valued
operators; an absent ``D_i`` / ``C_i`` is the zero map.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .algorithms import StoppingRule, solve
from .catalog import (ProblemInstance, _random_skew, _random_spd,
                      make_affine_monotone, make_box_normal_cone,
                      make_l1_subdifferential, make_quadratic_gradient,
                      make_scaled_identity, make_skew)
from .exceptions import ContractViolation, InvalidParameter
from .operators import (BlockDiagonalOp, InverseOp, SetValuedOp,
                        ShiftedScaledOp, SingleValuedOp, ZeroMap,
                        set_op_from_dict, single_op_from_dict, spectral_norm)
from .stepsize import plan_step_size
from .validation import check_matrix, check_point, check_positive

__all__ = [
    "CompositeBlock", "CompositeProblem", "LiftedPoint", "LiftedQ", "LiftedR",
    "aggregate_constants", "lifted_operator_M", "lifted_instance",
    "lifted_apply_Q", "lifted_apply_R", "lifted_resolvent", "PDState",
    "pd_init_state", "primal_dual_step", "primal_dual_solve",
    "check_residuals", "synthesize_composite",
]


@dataclass
class CompositeBlock:
    """One ``(B_i, D_i^{-1}, C_i^{-1}, L_i, r_i)`` term of the composite sum."""

    Bi: SetValuedOp
    Li: np.ndarray
    ri: np.ndarray = None
    Di_inv: SingleValuedOp = None
    Ci_inv: SingleValuedOp = None

    def __post_init__(self):
        self.Li = check_matrix(self.Li, "L_i", square=False)
        if not np.any(self.Li):
            raise InvalidParameter("L_i must be a nonzero linear operator")
        g = self.Li.shape[0]
        if not isinstance(self.Bi, SetValuedOp):
            raise ContractViolation("B_i must be a SetValuedOp")
        if not self.Bi.supports_inverse:
            raise InvalidParameter(f"B_i family {self.Bi.kind!r} has no implementable inverse resolvent")
        self.ri = np.zeros(g) if self.ri is None else check_point(self.ri, g, "r_i")
        self.Di_inv = ZeroMap(g) if self.Di_inv is None else self.Di_inv
        self.Ci_inv = ZeroMap(g) if self.Ci_inv is None else self.Ci_inv
        for name, op in (("B_i", self.Bi), ("D_i^-1", self.Di_inv), ("C_i^-1", self.Ci_inv)):
            if op.dim is not None and op.dim != g:
                raise ContractViolation(f"{name} has dim {op.dim}, block has dim {g}")
        if self.Di_inv.lipschitz is None:
            raise ContractViolation("D_i^-1 must declare a Lipschitz constant")
        if not self.Ci_inv.is_zero and self.Ci_inv.cocoercivity is None:
            raise ContractViolation("C_i^-1 must declare a cocoercivity modulus")

    @property
    def g(self):
        return self.Li.shape[0]

    @property
    def nu(self):
        return float(self.Di_inv.lipschitz)

    @property
    def mu(self):
        return math.inf if self.Ci_inv.is_zero else float(self.Ci_inv.cocoercivity)

    def to_dict(self):
        return {"Bi": self.Bi.to_dict(), "Di_inv": self.Di_inv.to_dict(),
                "Ci_inv": self.Ci_inv.to_dict(), "Li": self.Li.tolist(), "ri": self.ri.tolist()}


@dataclass
class LiftedPoint:
    """Point ``(x, v_1, ..., v_m)`` of the product space."""

    x: np.ndarray
    v: list

    def to_vector(self):
        return np.concatenate([self.x] + list(self.v))

    @classmethod
    def from_vector(cls, problem, vec):
        vec = np.asarray(vec, dtype=float)
        n = problem.n
        parts, start = [], n
        for blk in problem.blocks:
            parts.append(vec[start:start + blk.g].copy())
            start += blk.g
        return cls(vec[:n].copy(), parts)

    def norm(self):
        return float(np.linalg.norm(self.to_vector()))


@dataclass
class CompositeProblem:
    """Primal-dual composite inclusion (see module docstring)."""

    A: SetValuedOp
    B: SingleValuedOp
    C: SingleValuedOp
    z: np.ndarray
    blocks: list
    known_solution: LiftedPoint = None
    meta: dict = field(default_factory=dict)

    RESIDUAL_TOL = 1e-8

    def __post_init__(self):
        self.z = check_point(self.z, name="z")
        n = self.z.size
        if not self.blocks:
            raise InvalidParameter("a composite problem needs m >= 1 blocks")
        for name, op in (("A", self.A), ("B", self.B), ("C", self.C)):
            if op.dim is not None and op.dim != n:
                raise ContractViolation(f"{name} has dim {op.dim}, problem has dim {n}")
        for i, blk in enumerate(self.blocks):
            if blk.Li.shape[1] != n:
                raise ContractViolation(f"L_{i + 1} has {blk.Li.shape[1]} columns, expected {n}")
        if self.B.lipschitz is None:
            raise ContractViolation("B must declare a Lipschitz constant")
        if not self.C.is_zero and self.C.cocoercivity is None:
            raise ContractViolation("C must declare a cocoercivity modulus")
        if self.known_solution is not None:
            ks = self.known_solution
            if not isinstance(ks, LiftedPoint):
                ks = LiftedPoint(ks["x"], ks["v"])
            self.known_solution = LiftedPoint(check_point(ks.x, n, "x*"),
                                              [check_point(v, b.g, "v*") for v, b in zip(ks.v, self.blocks)])
            p_res, d_res = check_residuals(self, self.known_solution.x, self.known_solution.v)
            if max([p_res] + d_res) > self.RESIDUAL_TOL:
                raise ContractViolation(f"known_solution residuals {p_res:.3e}, {d_res} exceed tolerance")

    @property
    def n(self):
        return self.z.size

    @property
    def m(self):
        return len(self.blocks)

    @property
    def lifted_dim(self):
        return self.n + sum(b.g for b in self.blocks)

    def to_dict(self):
        d = {"dim": self.n, "A": self.A.to_dict(), "B": self.B.to_dict(), "C": self.C.to_dict(),
             "z": self.z.tolist(), "blocks": [b.to_dict() for b in self.blocks]}
        if self.known_solution is not None:
            d["known_solution"] = {"x": self.known_solution.x.tolist(),
                                   "v": [v.tolist() for v in self.known_solution.v]}
        if self.meta:
            d["meta"] = dict(self.meta)
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            z = check_point(d["z"], d.get("dim"), "z")
            n = z.size
            blocks = []
            for b in d["blocks"]:
                g = len(b["ri"]) if "ri" in b else np.asarray(b["Li"]).shape[0]
                blocks.append(CompositeBlock(
                    Bi=set_op_from_dict(b["Bi"], g), Li=b["Li"], ri=b.get("ri"),
                    Di_inv=single_op_from_dict(b.get("Di_inv", {"type": "zero"}), g),
                    Ci_inv=single_op_from_dict(b.get("Ci_inv", {"type": "zero"}), g)))
            return cls(A=set_op_from_dict(d["A"], n),
                       B=single_op_from_dict(d.get("B", {"type": "zero"}), n),
                       C=single_op_from_dict(d.get("C", {"type": "zero"}), n),
                       z=z, blocks=blocks, known_solution=d.get("known_solution"),
                       meta=d.get("meta", {}))
        except KeyError as exc:
            raise InvalidParameter(f"composite description is missing key {exc}") from None


def aggregate_constants(problem):
    """``(L_bar, beta_bar)`` for the lifted ``Q`` and ``R``.

    ``L_bar = max(L, nu_1, ..., nu_m) + sqrt(sum |L_i|^2)`` and
    ``beta_bar = min(beta, mu_1, ..., mu_m)``, with ``|L_i|`` the spectral norm.
    """
    L = float(problem.B.lipschitz)
    coupling = math.sqrt(sum(spectral_norm(b.Li) ** 2 for b in problem.blocks))
    L_bar = max([L] + [b.nu for b in problem.blocks]) + coupling
    beta = math.inf if problem.C.is_zero else float(problem.C.cocoercivity)
    beta_bar = min([beta] + [b.mu for b in problem.blocks])
    return L_bar, beta_bar


class _LiftedMap(SingleValuedOp):
    def __init__(self, problem, lipschitz=None, cocoercivity=None):
        super().__init__(lipschitz, cocoercivity)
        self.problem = problem
        self.dim = problem.lifted_dim
        self._slices = []
        start = problem.n
        for blk in problem.blocks:
            self._slices.append(slice(start, start + blk.g))
            start += blk.g

    def to_dict(self):
        raise InvalidParameter("lifted operators are derived objects and are not serialized")


class LiftedQ(_LiftedMap):
    """``(x, v) -> (Bx + sum L_i^T v_i, -L_i x + D_i^{-1} v_i)``."""

    kind = "lifted_Q"

    def __init__(self, problem):
        super().__init__(problem, lipschitz=aggregate_constants(problem)[0])
        self.is_linear = problem.B.is_linear and all(b.Di_inv.is_linear for b in problem.blocks)

    def _eval(self, p):
        prob = self.problem
        x = p[:prob.n]
        out = np.empty_like(p)
        s = prob.B._eval(x)
        for blk, sl in zip(prob.blocks, self._slices):
            s = s + blk.Li.T @ p[sl]
            out[sl] = -(blk.Li @ x) + blk.Di_inv._eval(p[sl])
        out[:prob.n] = s
        return out


class LiftedR(_LiftedMap):
    """``(x, v) -> (Cx, C_i^{-1} v_i)``."""

    kind = "lifted_R"

    def __init__(self, problem):
        beta_bar = aggregate_constants(problem)[1]
        super().__init__(problem, cocoercivity=beta_bar)
        self.is_linear = problem.C.is_linear and all(b.Ci_inv.is_linear for b in problem.blocks)
        self._zero = problem.C.is_zero and all(b.Ci_inv.is_zero for b in problem.blocks)

    @property
    def is_zero(self):
        return self._zero

    def _eval(self, p):
        prob = self.problem
        out = np.empty_like(p)
        out[:prob.n] = prob.C._eval(p[:prob.n])
        for blk, sl in zip(prob.blocks, self._slices):
            out[sl] = blk.Ci_inv._eval(p[sl])
        return out


def lifted_operator_M(problem):
    """``M`` as a block-diagonal set-valued operator.

    Its resolvent is ``(J_{lam A}(x + lam z), J_{lam B_i^{-1}}(v_i - lam r_i))``.
    """
    blocks = [ShiftedScaledOp(problem.A, 1.0, -problem.z)]
    blocks += [ShiftedScaledOp(InverseOp(b.Bi), 1.0, b.ri) for b in problem.blocks]
    return BlockDiagonalOp(blocks, [problem.n] + [b.g for b in problem.blocks])


def lifted_instance(problem):
    """The three-operator instance ``(M, Q, R)`` on the product space."""
    ks = None if problem.known_solution is None else problem.known_solution.to_vector()
    return ProblemInstance(lifted_operator_M(problem), LiftedQ(problem), LiftedR(problem),
                           problem.lifted_dim, known_solution=ks, meta={"lifted": True})


def _as_vector(problem, p):
    if isinstance(p, LiftedPoint):
        if len(p.v) != problem.m:
            raise ContractViolation(f"expected {problem.m} dual blocks, got {len(p.v)}")
        x = check_point(p.x, problem.n, "x")
        vs = [check_point(v, b.g, f"v_{i + 1}") for i, (v, b) in enumerate(zip(p.v, problem.blocks))]
        return np.concatenate([x] + vs)
    return check_point(p, problem.lifted_dim, "p")


def lifted_apply_Q(problem, p):
    return LiftedPoint.from_vector(problem, LiftedQ(problem).apply(_as_vector(problem, p)))


def lifted_apply_R(problem, p):
    return LiftedPoint.from_vector(problem, LiftedR(problem).apply(_as_vector(problem, p)))


def lifted_resolvent(problem, lam, p):
    lam = check_positive(lam, "lambda")
    return LiftedPoint.from_vector(problem, lifted_operator_M(problem).resolvent(_as_vector(problem, p), lam))


# ---------------------------------------------------------------------------
# Blockwise primal-dual iteration
# ---------------------------------------------------------------------------


@dataclass
class PDState:
    """Primal-dual iterate with the previous forward terms.

    ``s_prev = B x_{k-1} + sum L_i^T v_{i,k-1}`` and
    ``t_prev[i] = -L_i x_{k-1} + D_i^{-1} v_{i,k-1}``.
    """

    x: np.ndarray
    v: list
    s_prev: np.ndarray
    t_prev: list
    k: int = 0


def _forward_terms(problem, x, v):
    s = problem.B._eval(x)
    t = []
    for blk, vi in zip(problem.blocks, v):
        s = s + blk.Li.T @ vi
        t.append(-(blk.Li @ x) + blk.Di_inv._eval(vi))
    return s, t


def pd_init_state(problem, init=None, init_prev=None):
    if init is None:
        init = LiftedPoint(np.zeros(problem.n), [np.zeros(b.g) for b in problem.blocks])
    prev = init if init_prev is None else init_prev
    x = check_point(init.x, problem.n, "x0")
    v = [check_point(vi, b.g, "v0") for vi, b in zip(init.v, problem.blocks)]
    px = check_point(prev.x, problem.n, "x_-1")
    pv = [check_point(vi, b.g, "v_-1") for vi, b in zip(prev.v, problem.blocks)]
    s_prev, t_prev = _forward_terms(problem, px, pv)
    return PDState(x, v, s_prev, t_prev, 0)


def primal_dual_step(state, problem, lam):
    """One primal-dual step written blockwise::

        x+   = J_{lam A}(x - lam s - lam Cx + lam z) - lam (s - s_prev)
        v_i+ = J_{lam B_i^-1}(v_i - lam t_i - lam C_i^-1 v_i - lam r_i) - lam (t_i - t_prev_i)

    with ``s = Bx + sum L_i^T v_i`` and ``t_i = -L_i x + D_i^{-1} v_i``.
    """
    x, v = state.x, state.v
    s, t = _forward_terms(problem, x, v)
    x_new = (problem.A._resolve(x - lam * s - lam * problem.C._eval(x) + lam * problem.z, lam)
             - lam * (s - state.s_prev))
    v_new = []
    for blk, vi, ti, ti_prev in zip(problem.blocks, v, t, state.t_prev):
        arg = vi - lam * ti - lam * blk.Ci_inv._eval(vi) - lam * blk.ri
        v_new.append(blk.Bi._inverse_resolve(arg, lam) - lam * (ti - ti_prev))
    return PDState(x_new, v_new, s, t, state.k + 1)


def primal_dual_solve(problem, stop=None, init=None, plan="auto"):
    """Solve the primal-dual pair with the lifted outer reflected iteration.

    Returns
    -------
    x : ndarray
    v : list of ndarray
    trace : IterationTrace
        Trace of the lifted run (distances measured in the product norm).
    """
    if plan == "auto":
        plan = plan_step_size(*aggregate_constants(problem))
    lifted = lifted_instance(problem)
    x0 = None if init is None else _as_vector(problem, init)
    stop = StoppingRule() if stop is None else stop
    p, trace = solve(lifted, "orfbs", plan, stop, x0=x0)
    sol = LiftedPoint.from_vector(problem, p)
    return sol.x, sol.v, trace


def check_residuals(problem, x, v, lambda_probe=1.0):
    """Residuals of the primal and dual inclusions.

    ``primal = |x - J_{lam A}(x + lam (z - sum L_i^T v_i - Bx - Cx))|`` and
    ``dual_i = |v_i - J_{lam B_i^-1}(v_i + lam (L_i x - r_i - D_i^-1 v_i - C_i^-1 v_i))|``;
    all vanish exactly at a primal-dual solution.
    """
    lam = check_positive(lambda_probe, "lambda_probe")
    x = check_point(x, problem.n, "x")
    if len(v) != problem.m:
        raise ContractViolation(f"expected {problem.m} dual blocks, got {len(v)}")
    v = [check_point(vi, b.g, f"v_{i + 1}") for i, (vi, b) in enumerate(zip(v, problem.blocks))]
    w = problem.z - problem.B._eval(x) - problem.C._eval(x)
    for blk, vi in zip(problem.blocks, v):
        w = w - blk.Li.T @ vi
    primal = float(np.linalg.norm(x - problem.A._resolve(x + lam * w, lam)))
    dual = []
    for blk, vi in zip(problem.blocks, v):
        arg = vi + lam * (blk.Li @ x - blk.ri - blk.Di_inv._eval(vi) - blk.Ci_inv._eval(vi))
        dual.append(float(np.linalg.norm(vi - blk.Bi._inverse_resolve(arg, lam))))
    return primal, dual


# ---------------------------------------------------------------------------
# Planted composite instances
# ---------------------------------------------------------------------------


def _plant_block(rng, n, g, x_star, flavor):
    Li = rng.standard_normal((g, n)) / math.sqrt(n)
    w = rng.uniform(-1, 1, g)  # the point with w in B_i^{-1} v_i*
    if flavor == 0:
        weight = rng.uniform(0.3, 1.0)
        zero = rng.random(g) < 0.4
        w[zero] = 0.0
        v_star = weight * np.sign(w)
        v_star[zero] = rng.uniform(-0.5 * weight, 0.5 * weight, int(zero.sum()))
        Bi = make_l1_subdifferential(weight, g)
    else:
        P = _random_spd(rng, g, 0.5, 1.0) + _random_skew(rng, g, 0.3)
        q = rng.uniform(-0.5, 0.5, g)
        v_star = P @ w + q
        Bi = make_affine_monotone(P, q)
    Di_inv = make_skew(_random_skew(rng, g, rng.uniform(0.2, 0.8))) if g > 1 else ZeroMap(g)
    Ci_inv = make_scaled_identity(rng.uniform(0.5, 1.0), g)
    ri = Li @ x_star - Di_inv._eval(v_star) - Ci_inv._eval(v_star) - w
    return CompositeBlock(Bi=Bi, Li=Li, ri=ri, Di_inv=Di_inv, Ci_inv=Ci_inv), v_star


def synthesize_composite(seed, n=2, m=1, g=2):
    """Planted primal-dual instance with known ``(x*, v*)``.

    ``x*`` sits strictly inside the box defining ``A`` so ``A(x*) = {0}``;
    ``r_i`` and ``z`` are then chosen so both inclusions hold exactly.
    """
    if n < 1 or m < 1:
        raise InvalidParameter("need n >= 1 and m >= 1")
    gs = [g] * m if np.isscalar(g) else list(g)
    if len(gs) != m:
        raise InvalidParameter("g must be an int or a list of m ints")
    rng = np.random.default_rng([int(seed) % 2**63, n, m, 7])
    x_star = rng.uniform(-1.5, 1.5, n)
    A = make_box_normal_cone(x_star - rng.uniform(0.5, 1.5, n), x_star + rng.uniform(0.5, 1.5, n))
    B = make_skew(_random_skew(rng, n, rng.uniform(0.3, 0.8))) if n > 1 else ZeroMap(n)
    C = make_quadratic_gradient(_random_spd(rng, n, 0.5, 1.0))
    blocks, v_star = [], []
    for i, gi in enumerate(gs):
        blk, vs = _plant_block(rng, n, gi, x_star, i % 2)
        blocks.append(blk)
        v_star.append(vs)
    z = B._eval(x_star) + C._eval(x_star)
    for blk, vs in zip(blocks, v_star):
        z = z + blk.Li.T @ vs
    return CompositeProblem(A=A, B=B, C=C, z=z, blocks=blocks,
                            known_solution=LiftedPoint(x_star, v_star),
                            meta={"seed": int(seed), "recipe": "composite"})
