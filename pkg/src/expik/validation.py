"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .errors import ContractViolation


def check_vector(x, n=None, name="x"):
    """Return ``x`` as a finite 1-D complex array, optionally of length ``n``."""
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ContractViolation(f"{name} must be non-empty")
    arr = arr.astype(complex, copy=True)
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    if n is not None and arr.shape[0] != n:
        raise ContractViolation(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


def check_square(M, name="M", dtype=complex):
    """Return ``M`` as a finite square 2-D array."""
    arr = np.asarray(M, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return arr


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ContractViolation(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ContractViolation(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_time(t, name="t"):
    if not isinstance(t, numbers.Real) or not np.isfinite(t):
        raise ContractViolation(f"{name} must be a finite real number, got {t!r}")
    if t < 0:
        raise ContractViolation(f"{name} must be non-negative, got {t}")
    return float(t)
