"""Numeric substrate helpers.

Every array flowing through the engine is a dense, row-major (C-order)
numpy float64 ndarray. The helpers below enforce that contract at public
entry points so the rest of the code can assume it.
"""

import numpy as np

Tensor = np.ndarray


def as_tensor(values, name: str = "tensor") -> Tensor:
    """Coerce to a contiguous float64 array, rejecting NaN/Inf."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_finite(arr: Tensor, name: str) -> Tensor:
    """Assert an intermediate result stayed finite."""
    if arr.size and not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} produced non-finite values")
    return arr
