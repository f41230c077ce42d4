"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numbers

import numpy as np


class DomainError(ValueError):
    """A numeric argument lies outside the domain where an operation is defined."""


class DegenerateInputError(ValueError):
    """The data carry no information for the requested computation."""


def check_series(y, min_length: int = 2, name: str = "series") -> np.ndarray:
    """Return ``y`` as a finite 1-d float64 array of length >= ``min_length``.

    Column vectors of shape ``(n, 1)`` are accepted and flattened, which lets the
    estimators consume ``X`` the way scikit-learn passes it around.
    """
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} observations, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_hurst(H, lo: float = 0.0, hi: float = 1.0, name: str = "H") -> float:
    if not isinstance(H, numbers.Real) or not (lo < H < hi):
        raise DomainError(f"{name} must lie in ({lo}, {hi}), got {H!r}")
    return float(H)


def check_alpha(alpha) -> float:
    if not isinstance(alpha, numbers.Real) or not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
