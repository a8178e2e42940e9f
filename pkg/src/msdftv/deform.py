"""Context-aware dynamic deformable convolution over stacked half-patches.

Each scale owns a base kernel plus two lightweight generator heads: one
producing a per-patch, per-tap amplitude modulation (1 + intra + inter
context terms) and one producing bounded fractional sampling offsets
(scaled tanh, bound floor(period/4)). With both heads zero-initialized the
block reduces exactly to a static convolution with the base kernel.

Offsets shift tap sampling positions along the within-half-patch time axis
only; sampling clamps at the half-patch boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError
from .patching import PatchTensor3D


@dataclass
class GeneratorHead:
    """Two-layer affine head (hidden ReLU) mapping context vectors to taps."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def apply(self, x: Tensor) -> Tensor:
        hidden = ad.relu(ad.add(ad.matmul(x, self.w1), self.b1))
        return ad.add(ad.matmul(hidden, self.w2), self.b2)

    def tensors(self):
        return (self.w1, self.b1, self.w2, self.b2)


@dataclass
class DeformableKernel:
    """Per-scale deformable convolution parameters."""

    w_base: Tensor  # [K_t, C_m, C_m]
    intra_head: GeneratorHead
    inter_head: GeneratorHead
    offset_head: GeneratorHead

    def __post_init__(self):
        if self.w_base.ndim != 3 or self.w_base.shape[1] != self.w_base.shape[2]:
            raise ContractError(f"base kernel must be [K_t, C_m, C_m], got {self.w_base.shape}")

    @property
    def taps(self) -> int:
        return self.w_base.shape[0]

    @property
    def channels(self) -> int:
        return self.w_base.shape[1]


def init_kernel(channels: int, taps: int, rng: np.random.Generator) -> DeformableKernel:
    """Fresh kernel: uniform base weights, zero-initialized generator outputs."""
    if taps < 1:
        raise ConfigError(f"need at least one kernel tap, got {taps}")
    bound = np.sqrt(1.0 / (taps * channels))
    w_base = Tensor(rng.uniform(-bound, bound, (taps, channels, channels)), requires_grad=True)

    def head(in_dim):
        s = np.sqrt(1.0 / in_dim)
        return GeneratorHead(
            w1=Tensor(rng.uniform(-s, s, (in_dim, channels)), requires_grad=True),
            b1=Tensor(np.zeros(channels), requires_grad=True),
            w2=Tensor(np.zeros((channels, taps)), requires_grad=True),
            b2=Tensor(np.zeros(taps), requires_grad=True),
        )

    return DeformableKernel(
        w_base=w_base,
        intra_head=head(channels),
        inter_head=head(channels),
        offset_head=head(2 * channels),
    )


def pool_context(pt: PatchTensor3D):
    """Within-patch and cross-patch context vectors, each [N, C_m].

    The intra vector is the mean over a patch's 2 x (P/2) positions; the
    inter vector is the mean of the other patches' means (zero when N = 1).
    """
    n = pt.n_patches
    v_intra = ad.tensor_mean(pt.data, axis=(1, 2))
    if n == 1:
        v_inter = Tensor(np.zeros((1, pt.channels)))
    else:
        total = ad.tensor_sum(v_intra, axis=0)
        v_inter = ad.mul(ad.sub(total, v_intra), 1.0 / (n - 1))
    return v_intra, v_inter


def gen_alpha(v_intra: Tensor, v_inter: Tensor, kern: DeformableKernel) -> Tensor:
    """Amplitude modulation per patch and tap: 1 + intra term + inter term."""
    return ad.add(1.0, ad.add(kern.intra_head.apply(v_intra), kern.inter_head.apply(v_inter)))


def gen_offsets(v_intra: Tensor, v_inter: Tensor, kern: DeformableKernel, r_t: int) -> Tensor:
    """Bounded sampling offsets per patch and tap: r_t * tanh(head(context))."""
    if r_t < 0:
        raise ConfigError(f"offset bound must be non-negative, got {r_t}")
    raw = kern.offset_head.apply(ad.concat([v_intra, v_inter], axis=1))
    return ad.mul(float(r_t), ad.tanh(raw))


def offset_bound(period: int) -> int:
    """Scale-aware offset range: longer periods allow larger shifts."""
    return period // 4


def deform_conv3d(pt: PatchTensor3D, kern: DeformableKernel, alpha: Tensor, delta: Tensor) -> PatchTensor3D:
    """Apply the modulated, offset-sampled kernel; output shape equals input.

    For output position t of patch n, tap k samples the input half-patch at
    t + k - floor(K/2) + delta[n, k] via linear interpolation (clamped to the
    half-patch), scales it by alpha[n, k], and projects through the k-th base
    weight matrix. When the half-patch is shorter than the configured tap
    count only the first floor(P/2) taps participate.
    """
    n, _, half, channels = pt.data.shape
    if alpha.shape != (n, kern.taps) or delta.shape != (n, kern.taps):
        raise ContractError(
            f"alpha/delta must be [{n}, {kern.taps}], got {alpha.shape} and {delta.shape}"
        )
    k_eff = min(kern.taps, half)
    center = k_eff // 2
    grid = np.arange(half, dtype=np.float64).reshape(1, 1, half, 1)
    out = None
    for k in range(k_eff):
        shift = ad.reshape(delta[:, k], (n, 1, 1, 1))
        positions = ad.add(Tensor(grid + (k - center)), shift)
        sampled = ad.sample_linear(pt.data, positions, axis=2)
        modulated = ad.mul(sampled, ad.reshape(alpha[:, k], (n, 1, 1, 1)))
        term = ad.matmul(modulated, kern.w_base[k])
        out = term if out is None else ad.add(out, term)
    return PatchTensor3D(data=out, period=pt.period, pad_len=pt.pad_len)
