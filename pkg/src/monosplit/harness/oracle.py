"""Reference solutions computed independently of the splitting code.

Piecewise-affine problems in low dimension are solved exactly by enumerating
the active pieces of ``A`` (box faces or l1 sign patterns) and solving one
linear system per piece. Everything else falls back to a long run of the
forward-backward-half-forward iteration, implemented here on its own so the
oracle never shares a step with the solvers it is used to check.
"""

import itertools
import math

import numpy as np

from ..catalog import fixed_point_residual
from ..exceptions import OracleFailure
from ..operators import (AffineMonotoneOp, BoxNormalCone, L1Subdifferential,
                         MatrixMap, ScaledIdentity, ZeroMap, ZeroSetOp)
from ..validation import check_point

__all__ = ["oracle_solve", "enumerate_affine_solution", "ENUM_MAX_DIM"]

ENUM_MAX_DIM = 6
FBHFS_MAX_ITERS = 1_000_000
FBHFS_TOL = 1e-12
ACCEPT_RESIDUAL = 1e-9


def _affine_parts(op, n):
    """``(K, c)`` with ``op(x) = K x + c``, or ``None`` if ``op`` is not affine."""
    if isinstance(op, ZeroMap) or isinstance(op, ZeroSetOp):
        return np.zeros((n, n)), np.zeros(n)
    if isinstance(op, MatrixMap):
        return op.m, (np.zeros(n) if op.b is None else op.b)
    if isinstance(op, ScaledIdentity):
        return op.factor * np.eye(n), np.zeros(n)
    if isinstance(op, AffineMonotoneOp):
        return op.m, op.b
    return None


def _coordinate_pieces(A, n):
    """Per-coordinate alternatives ``(fixed_value or None, target, check)``.

    A ``None`` fixed value means the coordinate is free and ``F_i = target``;
    otherwise ``x_i`` is pinned and ``check(F_i)`` must hold. Free coordinates
    additionally carry an admissible interval for ``x_i``.
    """
    pieces = []
    for i in range(n):
        if isinstance(A, BoxNormalCone):
            lo, hi = A.lo[i], A.hi[i]
            opts = [("free", None, 0.0, (lo, hi))]
            if math.isfinite(lo):
                opts.append(("lo", lo, None, 1.0))    # F_i >= 0
            if math.isfinite(hi) and hi != lo:
                opts.append(("hi", hi, None, -1.0))   # F_i <= 0
        elif isinstance(A, L1Subdifferential):
            w = A.weight
            opts = [("pos", None, -w, (0.0, math.inf)),
                    ("neg", None, w, (-math.inf, 0.0)),
                    ("zero", 0.0, None, w)]           # |F_i| <= w
        else:
            opts = [("free", None, 0.0, (-math.inf, math.inf))]
        pieces.append(opts)
    return pieces


def enumerate_affine_solution(problem, tol=1e-10):
    """Exact solution of a piecewise-affine instance, or ``None``.

    Applies when ``B`` and ``C`` are affine and ``A`` is zero, affine, a box
    normal cone or an l1 subdifferential.
    """
    n = problem.dim
    parts = [_affine_parts(op, n) for op in (problem.B, problem.C)]
    if any(p is None for p in parts):
        return None
    K = parts[0][0] + parts[1][0]
    c = parts[0][1] + parts[1][1]
    A = problem.A
    if isinstance(A, AffineMonotoneOp):
        K, c = K + A.m, c + A.b
        A = ZeroSetOp(n)
    elif not isinstance(A, (ZeroSetOp, BoxNormalCone, L1Subdifferential)):
        return None

    pieces = _coordinate_pieces(A, n)
    scale = 1.0 + np.abs(K).max() + np.abs(c).max()
    for choice in itertools.product(*pieces):
        free = [i for i, p in enumerate(choice) if p[1] is None]
        fixed = [i for i, p in enumerate(choice) if p[1] is not None]
        x = np.zeros(n)
        for i in fixed:
            x[i] = choice[i][1]
        if free:
            target = np.array([choice[i][2] for i in free])
            rhs = target - c[free] - K[np.ix_(free, fixed)] @ x[fixed]
            try:
                x[free] = np.linalg.solve(K[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
            if np.linalg.cond(K[np.ix_(free, free)]) > 1e12:
                continue
        F = K @ x + c
        ok = True
        for i, p in enumerate(choice):
            if p[1] is None:
                lo, hi = p[3]
                if not (lo - tol * scale <= x[i] <= hi + tol * scale):
                    ok = False
                    break
            elif p[0] == "zero":
                if abs(F[i]) > p[3] + tol * scale:
                    ok = False
                    break
            elif p[3] * F[i] < -tol * scale:
                ok = False
                break
        if ok and fixed_point_residual(problem.A, problem.B, problem.C, 1.0, x) <= ACCEPT_RESIDUAL:
            return x
    return None


def _fbhfs_lambda(L, beta):
    if math.isinf(beta):
        return 1.0 if L == 0 else 0.99 / L
    return 0.99 * 4 * beta / (1 + math.sqrt(1 + 16 * beta ** 2 * L ** 2))


def _fbhfs_reference(problem, x0, max_iters, tol):
    A, B, C = problem.A, problem.B, problem.C
    lam = _fbhfs_lambda(problem.L, problem.beta)
    x = x0.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iters):
            bx = B._eval(x)
            u = A._resolve(x - lam * (bx + C._eval(x)), lam)
            x_next = u + lam * bx - lam * B._eval(u)
            if not np.all(np.isfinite(x_next)):
                raise OracleFailure("reference iteration produced non-finite values")
            step = np.linalg.norm(x_next - x)
            x = x_next
            if step <= tol:
                return x
    raise OracleFailure(f"reference iteration did not reach step norm {tol:g} in {max_iters} iterations")


def oracle_solve(problem, x0=None, max_iters=FBHFS_MAX_ITERS, tol=FBHFS_TOL):
    """High-accuracy reference solution of ``0 in Ax + Bx + Cx``.

    Raises
    ------
    OracleFailure
        If neither route certifies a solution.
    """
    n = problem.dim
    x0 = np.zeros(n) if x0 is None else check_point(x0, n, "x0")
    if problem.A.is_zero and problem.B.is_zero and problem.C.is_zero:
        return x0.copy()
    if n <= ENUM_MAX_DIM:
        x = enumerate_affine_solution(problem)
        if x is not None:
            return x
    return _fbhfs_reference(problem, x0, max_iters, tol)
