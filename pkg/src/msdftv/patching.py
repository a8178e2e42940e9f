"""Channel embedding and period-aligned patch segmentation.

A scale's patches keep full per-timestep resolution: the raw patch slices
are combined additively with a per-patch convolution summary (kernel size
and stride both equal to the patch length), then each patch splits into two
stacked half-patches. The half-patch split is pure row-major re-indexing,
so it inverts exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError


@dataclass
class PatchTensor3D:
    """One scale's [N, 2, P/2, C_m] stacked half-patch representation."""

    data: Tensor
    period: int
    pad_len: int

    def __post_init__(self):
        if self.data.ndim != 4 or self.data.shape[1] != 2:
            raise ContractError(f"expected [N, 2, P/2, C_m], got shape {self.data.shape}")
        if self.data.shape[2] * 2 != self.period:
            raise ContractError(
                f"period {self.period} inconsistent with half-patch length {self.data.shape[2]}"
            )
        if not 0 <= self.pad_len < self.period:
            raise ContractError(f"pad_len {self.pad_len} outside [0, {self.period})")

    @property
    def n_patches(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


def adjust_period(period: int) -> int:
    """Round an odd detected period up so patches split into equal halves."""
    if period < 1:
        raise ConfigError(f"period must be positive, got {period}")
    return period if period % 2 == 0 else period + 1


def embed_channels(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-timestep affine map [L, C] -> [L, C_m]."""
    return ad.add(ad.matmul(x, w), b)


def patchify(x_emb: Tensor, period: int, w_patch: Tensor) -> Tensor:
    """Segment [L, C_m] into [N, P, C_m] patches with additive conv summary.

    The input is zero-padded at the tail to N*P rows (N = ceil(L/P)). A
    convolution with kernel size and stride P produces one summary vector
    per patch, which is added to every row of that patch's raw slice.
    """
    if period < 2:
        raise ConfigError(f"patch length must be >= 2, got {period}")
    if x_emb.ndim != 2:
        raise ContractError(f"patchify expects [L, C_m], got shape {x_emb.shape}")
    if w_patch.shape[0] != period:
        raise ContractError(f"patch conv kernel has {w_patch.shape[0]} taps, period is {period}")
    length, channels = x_emb.shape
    n = -(-length // period)
    pad_len = n * period - length
    padded = ad.pad_end(x_emb, axis=0, n=pad_len)
    raw = ad.reshape(padded, (n, period, channels))
    summary = ad.conv1d(ad.reshape(padded, (1, n * period, channels)), w_patch, stride=period)
    return ad.add(raw, ad.reshape(summary, (n, 1, channels)))


def reshape_3d(patches: Tensor, pad_len: int = 0) -> PatchTensor3D:
    """Split each patch into two stacked half-patches (re-indexing only)."""
    if patches.ndim != 3:
        raise ContractError(f"expected [N, P, C_m], got shape {patches.shape}")
    n, period, channels = patches.shape
    if period % 2 != 0:
        raise ContractError(f"patch length must be even, got {period}")
    data = ad.reshape(patches, (n, 2, period // 2, channels))
    return PatchTensor3D(data=data, period=period, pad_len=pad_len)


def unpatchify(pt: PatchTensor3D, length: int) -> Tensor:
    """Invert reshape_3d and patch concatenation, dropping the padded tail."""
    n = pt.n_patches
    if length != n * pt.period - pt.pad_len:
        raise ContractError(
            f"length {length} inconsistent with {n} patches of {pt.period} minus pad {pt.pad_len}"
        )
    flat = ad.reshape(pt.data, (n * pt.period, pt.channels))
    return flat[:length] if pt.pad_len else flat


def raw_patches(x: np.ndarray, period: int) -> np.ndarray:
    """Padded raw patch slices of a plain array; reference path for tests."""
    length, channels = x.shape
    n = -(-length // period)
    padded = np.pad(x, ((0, n * period - length), (0, 0)))
    return padded.reshape(n, period, channels)
