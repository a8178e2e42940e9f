"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError


def check_series(X) -> np.ndarray:
    """Coerce to a finite float64 [T, C] series (1-d input becomes one channel)."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise DimensionError(f"expected a [T, C] series, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DimensionError(f"series needs at least 2 rows, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise NumericError("series contains non-finite values")
    return arr


def check_windows(X, lookback: int, channels: int) -> tuple:
    """Coerce to finite [B, lookback, channels] windows.

    Returns (windows, squeezed) where squeezed marks a single [L, C] input.
    """
    arr = np.asarray(X, dtype=np.float64)
    squeezed = arr.ndim == 2
    if squeezed:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"expected [B, L, C] or [L, C] windows, got shape {arr.shape}")
    if arr.shape[1] != lookback or arr.shape[2] != channels:
        raise DimensionError(
            f"windows must be [*, {lookback}, {channels}], got {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise NumericError("windows contain non-finite values")
    return arr, squeezed
