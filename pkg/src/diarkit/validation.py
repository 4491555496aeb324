"""Input validation helpers shared by the estimator-facing modules."""

from __future__ import annotations

import numpy as np


def as_float_matrix(X, name: str = "X", allow_empty: bool = False) -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not allow_empty and A.shape[0] == 0:
        raise ValueError(f"{name} must contain at least one row")
    if A.size and not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


def as_float_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-D float64 array with finite entries."""
    v = np.asarray(x, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf")
    return v


def check_square(A, name: str = "A") -> np.ndarray:
    """Coerce to a square 2-D float64 array."""
    M = as_float_matrix(A, name=name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M
