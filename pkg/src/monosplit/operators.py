"""Operator abstractions for monotone inclusions on R^n.

Two families of objects live here:

* :class:`SetValuedOp` -- a maximally monotone operator that is only ever
  touched through its resolvent ``J_{lam A} = (I + lam A)^{-1}``.
* :class:`SingleValuedOp` -- an explicitly evaluable operator that carries
  declared Lipschitz / cocoercivity constants.

Every concrete family can be serialized to and from a plain ``dict`` so that
problem instances round-trip through JSON. :func:`certify` probes the declared
constants of a single-valued operator on random Gaussian pairs.

The public evaluation methods (:meth:`SingleValuedOp.apply`,
:meth:`SetValuedOp.resolvent`) validate their inputs and outputs. Solver loops
call the unchecked ``_eval`` / ``_resolve`` hooks and run a single divergence
check per iteration instead.
"""

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import ContractViolation, InvalidParameter, NumericError
from .validation import (check_matrix, check_nonnegative, check_point,
                         check_positive)

__all__ = [
    "SetValuedOp", "ZeroSetOp", "AffineMonotoneOp", "BoxNormalCone",
    "BallNormalCone", "L1Subdifferential", "ShiftedScaledOp", "InverseOp",
    "BlockDiagonalOp", "SingleValuedOp", "ZeroMap", "MatrixMap",
    "ScaledIdentity", "ComponentwiseSmooth", "CountingMap", "CountingSetOp",
    "apply", "resolvent_eval", "inverse_resolvent_eval", "certify",
    "CertReport", "PropertyCheck", "probe_firm_nonexpansive",
    "probe_inverse_identity", "set_op_from_dict", "single_op_from_dict",
    "spectral_norm", "PROBE_TOL", "MONOTONE_EIG_TOL",
]

PROBE_TOL = 1e-9
MONOTONE_EIG_TOL = 1e-10


def spectral_norm(m):
    """Largest singular value of a dense matrix."""
    m = np.asarray(m, dtype=float)
    if not np.any(m):
        return 0.0
    return float(np.linalg.norm(m, 2))


def _check_finite_output(y, what):
    if not np.all(np.isfinite(y)):
        raise NumericError(f"{what} produced non-finite output")
    return y


def _check_lambda(lam):
    return check_positive(lam, "lambda")


# ---------------------------------------------------------------------------
# Set-valued (resolvent-only) operators
# ---------------------------------------------------------------------------


class SetValuedOp:
    """Maximally monotone operator exposed through its resolvent.

    Subclasses implement ``_resolve(x, lam)``. The inverse resolvent defaults
    to the Moreau-type identity ``J_{lam A^{-1}}(x) = x - lam J_{A/lam}(x/lam)``.

    Attributes
    ----------
    kind : str
        Family name used in JSON descriptions.
    dim : int or None
        Ambient dimension, ``None`` for dimension-agnostic families.
    """

    kind = "abstract"
    dim = None
    supports_inverse = True

    def resolvent(self, x, lam):
        lam = _check_lambda(lam)
        x = check_point(x, self.dim)
        return _check_finite_output(self._resolve(x, lam), f"resolvent of {self.kind}")

    def inverse_resolvent(self, x, lam):
        if not self.supports_inverse:
            raise InvalidParameter(f"inverse resolvent is not implementable for family {self.kind!r}")
        lam = _check_lambda(lam)
        x = check_point(x, self.dim)
        return _check_finite_output(self._inverse_resolve(x, lam),
                                    f"inverse resolvent of {self.kind}")

    def _resolve(self, x, lam):
        raise NotImplementedError

    def _inverse_resolve(self, x, lam):
        return x - lam * self._resolve(x / lam, 1.0 / lam)

    @property
    def is_zero(self):
        return False

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class ZeroSetOp(SetValuedOp):
    """The zero operator; its resolvent is the identity."""

    kind = "zero"
    supports_inverse = False

    def __init__(self, dim=None):
        self.dim = None if dim is None else int(dim)

    def _resolve(self, x, lam):
        return x.copy()

    @property
    def is_zero(self):
        return True

    def to_dict(self):
        d = {"type": "zero"}
        if self.dim is not None:
            d["dim"] = self.dim
        return d


class AffineMonotoneOp(SetValuedOp):
    """``A(y) = M y + b`` with ``M + M^T`` positive semidefinite.

    The resolvent solves ``(I + lam M) x_hat = x - lam b``. LU factors are
    cached per ``lam``; the cache is filled under a lock so instances can be
    shared between threads.
    """

    kind = "affine"

    def __init__(self, m, b=None):
        m = check_matrix(m, "M")
        sym_min = float(np.linalg.eigvalsh(0.5 * (m + m.T)).min())
        if sym_min < -MONOTONE_EIG_TOL:
            raise InvalidParameter(
                f"affine operator is not monotone: min eigenvalue of sym(M) is {sym_min:.3e}")
        self.m = m
        self.dim = m.shape[0]
        self.b = np.zeros(self.dim) if b is None else check_point(b, self.dim, "b")
        self._factors = {}
        self._lock = threading.Lock()

    def evaluate(self, y):
        """Single-valued evaluation ``M y + b`` (the operator is affine)."""
        return self.m @ check_point(y, self.dim) + self.b

    def _factor(self, lam):
        fac = self._factors.get(lam)
        if fac is None:
            with self._lock:
                fac = self._factors.get(lam)
                if fac is None:
                    system = np.eye(self.dim) + lam * self.m
                    with np.errstate(all="ignore"):
                        fac = linalg.lu_factor(system, check_finite=False)
                    if not np.all(np.isfinite(fac[0])) or np.min(np.abs(np.diag(fac[0]))) == 0.0:
                        raise NumericError("singular resolvent system for affine operator")
                    self._factors[lam] = fac
        return fac

    def _resolve(self, x, lam):
        return linalg.lu_solve(self._factor(lam), x - lam * self.b, check_finite=False)

    def to_dict(self):
        return {"type": "affine", "m": self.m.tolist(), "b": self.b.tolist()}


class BoxNormalCone(SetValuedOp):
    """Normal cone of the box ``[lo, hi]``; the resolvent is a clamp."""

    kind = "box"

    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidParameter("box bounds must be non-empty vectors of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InvalidParameter("box bounds contain NaN")
        if np.any(lo > hi):
            bad = np.flatnonzero(lo > hi).tolist()
            raise InvalidParameter(f"box requires lo <= hi, violated at coordinates {bad}")
        self.lo, self.hi = lo, hi
        self.dim = lo.size

    def _resolve(self, x, lam):
        return np.minimum(np.maximum(x, self.lo), self.hi)

    def contains(self, y, tol=0.0):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lo - tol) and np.all(y <= self.hi + tol))

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class BallNormalCone(SetValuedOp):
    """Normal cone of the Euclidean ball ``{y : |y - center| <= radius}``."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = check_point(center, name="center")
        self.radius = check_positive(radius, "radius")
        self.dim = self.center.size

    def _resolve(self, x, lam):
        d = x - self.center
        nrm = np.linalg.norm(d)
        if nrm <= self.radius:
            return x.copy()
        return self.center + (self.radius / nrm) * d

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class L1Subdifferential(SetValuedOp):
    """Subdifferential of ``weight * |y|_1``; the resolvent is soft-thresholding."""

    kind = "l1"

    def __init__(self, weight, dim=None):
        self.weight = check_positive(weight, "weight")
        self.dim = None if dim is None else int(dim)

    def _resolve(self, x, lam):
        t = lam * self.weight
        return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)

    def _inverse_resolve(self, x, lam):
        # inverse of w*d|.|_1 is the normal cone of [-w, w]^n
        return np.clip(x, -self.weight, self.weight)

    def to_dict(self):
        d = {"type": "l1", "weight": self.weight}
        if self.dim is not None:
            d["dim"] = self.dim
        return d


class ShiftedScaledOp(SetValuedOp):
    """``y -> scale * base(y) + shift`` for a maximally monotone ``base``."""

    kind = "shifted"

    def __init__(self, base, scale=1.0, shift=None):
        if not isinstance(base, SetValuedOp):
            raise InvalidParameter("base must be a SetValuedOp")
        self.base = base
        self.scale = check_positive(scale, "scale")
        self.dim = base.dim
        if shift is None:
            self.shift = None
        else:
            self.shift = check_point(shift, self.dim, "shift")
            self.dim = self.shift.size

    def _resolve(self, x, lam):
        y = x if self.shift is None else x - lam * self.shift
        return self.base._resolve(y, lam * self.scale)

    @property
    def is_zero(self):
        return self.base.is_zero and self.shift is None

    def to_dict(self):
        d = {"type": "shifted", "base": self.base.to_dict(), "scale": self.scale}
        if self.shift is not None:
            d["shift"] = self.shift.tolist()
        return d


class InverseOp(SetValuedOp):
    """The inverse ``base^{-1}``; resolvent and inverse resolvent swap roles."""

    kind = "inverse"

    def __init__(self, base):
        if not base.supports_inverse:
            raise InvalidParameter(f"family {base.kind!r} has no implementable inverse resolvent")
        self.base = base
        self.dim = base.dim

    def _resolve(self, x, lam):
        return self.base._inverse_resolve(x, lam)

    def _inverse_resolve(self, x, lam):
        return self.base._resolve(x, lam)

    def to_dict(self):
        return {"type": "inverse", "base": self.base.to_dict()}


class BlockDiagonalOp(SetValuedOp):
    """Direct product of set-valued operators acting on consecutive blocks."""

    kind = "block"

    def __init__(self, blocks, dims):
        if len(blocks) != len(dims) or not blocks:
            raise InvalidParameter("blocks and dims must be non-empty and of equal length")
        for op, d in zip(blocks, dims):
            if op.dim is not None and op.dim != d:
                raise ContractViolation(f"block of dim {op.dim} placed in slot of dim {d}")
        self.blocks = list(blocks)
        self.dims = [int(d) for d in dims]
        self.dim = sum(self.dims)
        self._slices = []
        start = 0
        for d in self.dims:
            self._slices.append(slice(start, start + d))
            start += d

    def _resolve(self, x, lam):
        out = np.empty_like(x)
        for op, sl in zip(self.blocks, self._slices):
            out[sl] = op._resolve(x[sl], lam)
        return out

    def _inverse_resolve(self, x, lam):
        out = np.empty_like(x)
        for op, sl in zip(self.blocks, self._slices):
            out[sl] = op._inverse_resolve(x[sl], lam)
        return out

    def to_dict(self):
        return {"type": "block", "blocks": [b.to_dict() for b in self.blocks], "dims": self.dims}


# ---------------------------------------------------------------------------
# Single-valued operators
# ---------------------------------------------------------------------------


class SingleValuedOp:
    """Evaluable monotone operator with declared constants.

    A declared cocoercivity ``beta`` implies the Lipschitz constant ``1/beta``
    when no Lipschitz constant is declared explicitly. ``beta = inf`` marks a
    constant map.
    """

    kind = "abstract"
    dim = None
    is_linear = False

    def __init__(self, lipschitz=None, cocoercivity=None):
        self._lipschitz = None if lipschitz is None else check_nonnegative(lipschitz, "lipschitz")
        self.cocoercivity = (None if cocoercivity is None
                             else check_positive(cocoercivity, "cocoercivity", allow_inf=True))

    @property
    def lipschitz(self):
        if self._lipschitz is not None:
            return self._lipschitz
        if self.cocoercivity is not None:
            return 0.0 if math.isinf(self.cocoercivity) else 1.0 / self.cocoercivity
        return None

    @property
    def is_zero(self):
        return False

    def apply(self, x):
        x = check_point(x, self.dim)
        with np.errstate(over="ignore", invalid="ignore"):
            y = self._eval(x)
        if not np.all(np.isfinite(y)):
            raise NumericError(f"{self.kind} operator overflowed")
        return y

    __call__ = apply

    def _eval(self, x):
        raise NotImplementedError

    def _constants_dict(self):
        d = {}
        if self._lipschitz is not None:
            d["lipschitz"] = self._lipschitz
        if self.cocoercivity is not None:
            d["cocoercivity"] = None if math.isinf(self.cocoercivity) else self.cocoercivity
        return d

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return (f"{type(self).__name__}(kind={self.kind!r}, dim={self.dim}, "
                f"lipschitz={self.lipschitz}, cocoercivity={self.cocoercivity})")


class ZeroMap(SingleValuedOp):
    kind = "zero"
    is_linear = True

    def __init__(self, dim=None):
        super().__init__(lipschitz=0.0, cocoercivity=math.inf)
        self.dim = None if dim is None else int(dim)

    @property
    def is_zero(self):
        return True

    def _eval(self, x):
        return np.zeros_like(x)

    def to_dict(self):
        d = {"type": "zero"}
        if self.dim is not None:
            d["dim"] = self.dim
        return d


class MatrixMap(SingleValuedOp):
    """``x -> M x + b``.

    ``kind`` is a label ("linear", "affine", "skew", "quad_grad") recording
    which catalog constructor produced the map; the constants are whatever the
    caller declares.
    """

    is_linear = True

    def __init__(self, m, b=None, kind="linear", lipschitz=None, cocoercivity=None):
        super().__init__(lipschitz, cocoercivity)
        self.m = check_matrix(m, "M")
        self.dim = self.m.shape[0]
        self.b = None if b is None else check_point(b, self.dim, "b")
        if self.b is not None and not np.any(self.b):
            self.b = None
        self.kind = kind

    @property
    def is_zero(self):
        return self.b is None and not np.any(self.m)

    def _eval(self, x):
        y = self.m @ x
        if self.b is not None:
            y = y + self.b
        return y

    def to_dict(self):
        if self.kind == "skew":
            return {"type": "skew", "m": self.m.tolist()}
        if self.kind == "quad_grad":
            return {"type": "quad_grad", "q": self.m.tolist(),
                    "b": (np.zeros(self.dim) if self.b is None else self.b).tolist()}
        d = {"type": self.kind, "m": self.m.tolist()}
        if self.b is not None:
            d["b"] = self.b.tolist()
        d.update(self._constants_dict())
        return d


class ScaledIdentity(SingleValuedOp):
    """``x -> factor * x`` with ``factor >= 0``; ``1/factor``-cocoercive."""

    kind = "scaled_identity"
    is_linear = True

    def __init__(self, factor, dim=None):
        factor = check_nonnegative(factor, "factor")
        super().__init__(lipschitz=factor, cocoercivity=math.inf if factor == 0 else 1.0 / factor)
        self.factor = factor
        self.dim = None if dim is None else int(dim)

    @property
    def is_zero(self):
        return self.factor == 0.0

    def _eval(self, x):
        return self.factor * x

    def to_dict(self):
        d = {"type": "scaled_identity", "factor": self.factor}
        if self.dim is not None:
            d["dim"] = self.dim
        return d


_SMOOTH_FUNCS = {
    # name -> (f, sup |f'|)
    "tanh": (np.tanh, 1.0),
    "arctan": (np.arctan, 1.0),
    "sigmoid": (lambda t: 0.5 * (1.0 + np.tanh(0.5 * t)), 0.25),
}


class ComponentwiseSmooth(SingleValuedOp):
    """``x -> scale * f(x - center)`` applied coordinatewise, ``f`` nondecreasing.

    A nondecreasing scalar map with slope at most ``s`` is ``1/s``-cocoercive,
    so both constants follow from ``scale`` and the slope bound of ``f``.
    """

    kind = "smooth"

    def __init__(self, fn="tanh", scale=1.0, center=None, dim=None):
        if fn not in _SMOOTH_FUNCS:
            raise InvalidParameter(f"unknown smooth function {fn!r}; choose from {sorted(_SMOOTH_FUNCS)}")
        scale = check_positive(scale, "scale")
        slope = scale * _SMOOTH_FUNCS[fn][1]
        super().__init__(lipschitz=slope, cocoercivity=1.0 / slope)
        self.fn, self.scale = fn, scale
        self._f = _SMOOTH_FUNCS[fn][0]
        self.center = None if center is None else check_point(center, dim, "center")
        self.dim = self.center.size if self.center is not None else (None if dim is None else int(dim))

    def _eval(self, x):
        if self.center is not None:
            x = x - self.center
        return self.scale * self._f(x)

    def to_dict(self):
        d = {"type": "smooth", "fn": self.fn, "scale": self.scale}
        if self.center is not None:
            d["center"] = self.center.tolist()
        elif self.dim is not None:
            d["dim"] = self.dim
        return d


class CountingMap(SingleValuedOp):
    """Wraps a single-valued operator and counts raw evaluations."""

    def __init__(self, op):
        self.op = op
        self.kind, self.dim, self.is_linear = op.kind, op.dim, op.is_linear
        self._lipschitz, self.cocoercivity = op._lipschitz, op.cocoercivity
        self.calls = 0

    @property
    def is_zero(self):
        return self.op.is_zero

    def _eval(self, x):
        self.calls += 1
        return self.op._eval(x)

    def to_dict(self):
        return self.op.to_dict()


class CountingSetOp(SetValuedOp):
    """Wraps a set-valued operator and counts resolvent evaluations."""

    def __init__(self, op):
        self.op = op
        self.kind, self.dim, self.supports_inverse = op.kind, op.dim, op.supports_inverse
        self.calls = 0

    @property
    def is_zero(self):
        return self.op.is_zero

    def _resolve(self, x, lam):
        self.calls += 1
        return self.op._resolve(x, lam)

    def _inverse_resolve(self, x, lam):
        self.calls += 1
        return self.op._inverse_resolve(x, lam)

    def to_dict(self):
        return self.op.to_dict()


# ---------------------------------------------------------------------------
# Functional interface
# ---------------------------------------------------------------------------


def apply(op, x):
    """Evaluate a single-valued operator at ``x``."""
    return op.apply(x)


def resolvent_eval(op, lam, x):
    """Evaluate ``J_{lam A}(x)``."""
    return op.resolvent(x, lam)


def inverse_resolvent_eval(op, lam, x):
    """Evaluate ``J_{lam A^{-1}}(x)``.

    Raises :class:`InvalidParameter` for families without an implementable
    inverse resolvent (the zero operator).
    """
    return op.inverse_resolvent(x, lam)


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    worst_margin: float
    declared: float = None


@dataclass
class CertReport:
    """Outcome of :func:`certify`. ``worst_margin < -tol`` means a violation."""

    kind: str
    dim: int
    n_samples: int
    tol: float
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {
            "kind": self.kind, "dim": self.dim, "n_samples": self.n_samples,
            "tol": self.tol, "passed": self.passed,
            "checks": {k: {"passed": c.passed, "worst_margin": c.worst_margin,
                           "declared": c.declared}
                       for k, c in self.checks.items()},
        }


def _sample_dim(op, dim):
    d = op.dim if op.dim is not None else dim
    if d is None:
        raise ContractViolation("operator is dimension-agnostic; pass dim explicitly")
    if dim is not None and op.dim is not None and dim != op.dim:
        raise ContractViolation(f"dim={dim} does not match operator dim {op.dim}")
    return int(d)


def certify(op, n_samples=1000, seed=0, dim=None, tol=PROBE_TOL):
    """Probe monotonicity and the declared constants of ``op``.

    Draws ``n_samples`` Gaussian pairs ``(x, y)`` and records, per property,
    the smallest margin

    * monotone: ``<x - y, Tx - Ty>``
    * lipschitz: ``L |x - y| - |Tx - Ty|``
    * cocoercive: ``<x - y, Tx - Ty> - beta |Tx - Ty|^2``

    A property passes when its worst margin is ``>= -tol``. Failing probes are
    reported, never raised.
    """
    if n_samples < 1:
        raise ContractViolation("n_samples must be >= 1")
    d = _sample_dim(op, dim)
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((n_samples, d))
    ys = rng.standard_normal((n_samples, d))
    diff = xs - ys
    tdiff = np.array([op.apply(x) - op.apply(y) for x, y in zip(xs, ys)])
    inner = np.einsum("ij,ij->i", diff, tdiff)
    tnorm2 = np.einsum("ij,ij->i", tdiff, tdiff)

    report = CertReport(kind=op.kind, dim=d, n_samples=n_samples, tol=tol)
    worst = float(inner.min())
    report.checks["monotone"] = PropertyCheck("monotone", worst >= -tol, worst)
    lip = op._lipschitz
    if lip is not None:
        worst = float((lip * np.linalg.norm(diff, axis=1) - np.sqrt(tnorm2)).min())
        report.checks["lipschitz"] = PropertyCheck("lipschitz", worst >= -tol, worst, lip)
    beta = op.cocoercivity
    if beta is not None:
        if math.isinf(beta):
            # constant map: Tx - Ty must vanish
            worst = float(-np.sqrt(tnorm2).max())
        else:
            worst = float((inner - beta * tnorm2).min())
        report.checks["cocoercive"] = PropertyCheck("cocoercive", worst >= -tol, worst, beta)
    return report


def probe_firm_nonexpansive(op, lam, n_samples=1000, seed=0, dim=None, scale=1.0):
    """Worst margin of ``<x - y, Jx - Jy> - |Jx - Jy|^2`` over random pairs."""
    d = _sample_dim(op, dim)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(n_samples):
        x = scale * rng.standard_normal(d)
        y = scale * rng.standard_normal(d)
        jx, jy = op.resolvent(x, lam), op.resolvent(y, lam)
        dj = jx - jy
        worst = min(worst, float(np.dot(x - y, dj) - np.dot(dj, dj)))
    return worst


def probe_inverse_identity(op, lam, n_samples=100, seed=0, dim=None, scale=1.0):
    """Max violation of ``J_{lam A}(x) + lam J_{A^{-1}/lam}(x/lam) = x``."""
    d = _sample_dim(op, dim)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        x = scale * rng.standard_normal(d)
        lhs = op.resolvent(x, lam) + lam * op.inverse_resolvent(x / lam, 1.0 / lam)
        worst = max(worst, float(np.max(np.abs(lhs - x))))
    return worst


# ---------------------------------------------------------------------------
# JSON descriptions
# ---------------------------------------------------------------------------


def set_op_from_dict(d, dim=None):
    """Build a :class:`SetValuedOp` from ``{"type": <family>, ...}``."""
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidParameter(f"operator description needs a 'type' key, got {d!r}")
    t = d["type"]
    if t == "zero":
        return ZeroSetOp(d.get("dim", dim))
    if t == "affine":
        return AffineMonotoneOp(d["m"], d.get("b"))
    if t == "box":
        return BoxNormalCone(d["lo"], d["hi"])
    if t == "ball":
        return BallNormalCone(d["center"], d["radius"])
    if t == "l1":
        return L1Subdifferential(d["weight"], d.get("dim", dim))
    if t == "shifted":
        return ShiftedScaledOp(set_op_from_dict(d["base"], dim), d.get("scale", 1.0), d.get("shift"))
    if t == "inverse":
        return InverseOp(set_op_from_dict(d["base"], dim))
    if t == "block":
        return BlockDiagonalOp([set_op_from_dict(b, g) for b, g in zip(d["blocks"], d["dims"])],
                               d["dims"])
    raise InvalidParameter(f"unknown set-valued family {t!r}")


def _declared(d, key):
    v = d.get(key)
    if key == "cocoercivity" and key in d and v is None:
        return math.inf
    return v


def single_op_from_dict(d, dim=None):
    """Build a :class:`SingleValuedOp` from ``{"type": <family>, ...}``."""
    # imported lazily: catalog constructors compute the analytic constants
    from . import catalog

    if not isinstance(d, dict) or "type" not in d:
        raise InvalidParameter(f"operator description needs a 'type' key, got {d!r}")
    t = d["type"]
    if t == "zero":
        return ZeroMap(d.get("dim", dim))
    if t == "skew":
        return catalog.make_skew(d["m"])
    if t == "quad_grad":
        return catalog.make_quadratic_gradient(d["q"], d.get("b"))
    if t in ("linear", "affine"):
        return MatrixMap(d["m"], d.get("b"), kind=t, lipschitz=d.get("lipschitz"),
                         cocoercivity=_declared(d, "cocoercivity"))
    if t == "scaled_identity":
        return ScaledIdentity(d["factor"], d.get("dim", dim))
    if t == "smooth":
        return ComponentwiseSmooth(d.get("fn", "tanh"), d.get("scale", 1.0), d.get("center"),
                                   d.get("dim", dim))
    raise InvalidParameter(f"unknown single-valued family {t!r}")
