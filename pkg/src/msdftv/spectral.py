"""Dominant-period extraction from an input window via the DFT.

Frequency selection is a routing decision: amplitudes are computed on the
raw window and treated as constants of the forward pass, so no gradients
flow through this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, ContractError, InsufficientDataError


def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_radix2(x: np.ndarray) -> np.ndarray:
    """Iterative decimation-in-time FFT; length must be a power of two."""
    n = x.shape[0]
    out = np.asarray(x, dtype=np.complex128)[_bit_reverse_permutation(n)].copy()
    half = 1
    while half < n:
        tw = np.exp(-2j * np.pi * np.arange(half) / (2 * half))
        for start in range(0, n, 2 * half):
            even = out[start : start + half]
            odd = out[start + half : start + 2 * half] * tw
            out[start : start + half] = even + odd
            out[start + half : start + 2 * half] = even - odd
        half *= 2
    return out


@lru_cache(maxsize=8)
def _twiddle_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def full_spectrum(x: np.ndarray) -> np.ndarray:
    """Complex DFT of a 1-d real signal.

    Radix-2 when the length is a power of two, direct O(L^2) product
    otherwise; both agree within 1e-9 on power-of-two lengths.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n & (n - 1) == 0 and n >= 2:
        return _fft_radix2(x.astype(np.complex128))
    return _twiddle_matrix(n) @ x.astype(np.complex128)


def dft_amplitudes(x) -> Tensor:
    """Per-bin amplitude spectrum averaged over channels, DC excluded.

    ``x`` is [L, C]; the result covers bins 1..floor(L/2), so entry ``i``
    holds the amplitude of frequency ``i + 1``.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ContractError(f"dft_amplitudes expects [L, C], got shape {data.shape}")
    length, channels = data.shape
    if length < 4:
        raise InsufficientDataError(f"window of length {length} is too short for spectral analysis (need >= 4)")
    half = length // 2
    amps = np.zeros(half)
    for c in range(channels):
        amps += np.abs(full_spectrum(data[:, c])[1 : half + 1])
    return Tensor(amps / channels)


@dataclass(frozen=True)
class SpectralProfile:
    """Top-k frequency bins with their derived periods and amplitudes."""

    frequencies: tuple
    periods: tuple
    amplitudes: tuple

    def __post_init__(self):
        k = len(self.frequencies)
        if k < 1 or len(self.periods) != k or len(self.amplitudes) != k:
            raise ContractError("profile lists must be non-empty and equal-length")
        if len(set(self.frequencies)) != k:
            raise ContractError(f"frequencies must be distinct, got {self.frequencies}")
        if any(f < 1 for f in self.frequencies) or any(p < 1 for p in self.periods):
            raise ContractError("frequencies and periods must be positive")
        if any(a < 0 for a in self.amplitudes):
            raise ContractError("amplitudes must be non-negative")
        for a, b in zip(self.amplitudes, self.amplitudes[1:]):
            if b > a:
                raise ContractError("amplitudes must be sorted non-increasing")

    def __len__(self) -> int:
        return len(self.frequencies)


def topk_periods(amps, k: int, length: int) -> SpectralProfile:
    """Pick the k largest-amplitude bins; ties broken by lower frequency.

    Periods are floor(length / frequency); duplicate periods arising from
    distinct frequencies are retained.
    """
    data = amps.data if isinstance(amps, Tensor) else np.asarray(amps, dtype=np.float64)
    if data.ndim != 1:
        raise ContractError(f"amplitude spectrum must be 1-d, got shape {data.shape}")
    half = data.shape[0]
    if not 1 <= k <= half:
        raise ConfigError(f"k={k} outside valid range 1..{half}")
    if half != length // 2:
        raise ContractError(f"spectrum length {half} inconsistent with window length {length}")
    # lexsort: last key is primary, so order by descending amplitude then bin
    order = np.lexsort((np.arange(half), -data))[:k]
    freqs = tuple(int(i) + 1 for i in order)
    return SpectralProfile(
        frequencies=freqs,
        periods=tuple(length // f for f in freqs),
        amplitudes=tuple(float(data[i]) for i in order),
    )
