"""Input validation helpers."""

import math
import numbers

import numpy as np

from .exceptions import ContractViolation, InvalidParameter


def check_point(x, dim=None, name="x"):
    """Return `x` as a finite 1-D float array, optionally of length `dim`."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ContractViolation(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} has non-finite coordinates")
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolation(f"{name} has dim {arr.shape[0]}, expected {dim}")
    return arr


def check_matrix(m, name="M", square=True):
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidParameter(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise InvalidParameter(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameter(f"{name} has non-finite entries")
    return arr


def check_positive(value, name, allow_inf=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidParameter(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if math.isnan(value) or value <= 0 or (math.isinf(value) and not allow_inf):
        raise InvalidParameter(f"{name} must be positive{'' if allow_inf else ' and finite'}, got {value}")
    return value


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidParameter(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidParameter(f"{name} must be finite and >= 0, got {value}")
    return value


def check_same_dim(*dims):
    known = {d for d in dims if d is not None}
    if len(known) > 1:
        raise ContractViolation(f"dimension mismatch: {sorted(known)}")
    return known.pop() if known else None
