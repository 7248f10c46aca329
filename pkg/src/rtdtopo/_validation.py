"""Small input validation helpers shared by the estimators and free functions."""

import numbers

import numpy as np


def check_array_1d(values, size=None, name="array", dtype=float):
    """Return ``values`` as a finite 1-D float array, optionally of a fixed size."""
    arr = np.asarray(values, dtype=dtype)
    if arr.ndim != 1:
        arr = arr.ravel()
    if size is not None and arr.shape[0] != size:
        raise ValueError(f"{name} has {arr.shape[0]} entries, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_scalar(x, name, lo=None, hi=None, lo_inclusive=True, hi_inclusive=True,
                 target_type=numbers.Real):
    """Validate a scalar parameter against optional bounds and return it."""
    if not isinstance(x, target_type) or isinstance(x, bool):
        raise TypeError(f"{name} must be {target_type.__name__}, got {type(x).__name__}")
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if lo is not None:
        bad = x < lo if lo_inclusive else x <= lo
        if bad:
            op = ">=" if lo_inclusive else ">"
            raise ValueError(f"{name} must be {op} {lo}, got {x}")
    if hi is not None:
        bad = x > hi if hi_inclusive else x >= hi
        if bad:
            op = "<=" if hi_inclusive else "<"
            raise ValueError(f"{name} must be {op} {hi}, got {x}")
    return x


def per_axis(value, dim, name):
    """Broadcast a scalar or sequence to a length-``dim`` float tuple."""
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        arr = np.repeat(arr, dim)
    if arr.size != dim:
        raise ValueError(f"{name} needs 1 or {dim} values, got {arr.size}")
    return tuple(float(v) for v in arr)
