"""Full model assembly: multi-scale spectral patching, deformable convolution
per scale, amplitude-weighted fusion, and the forecast head."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .aggregation import ForecastHead, aggregate, forecast_head, init_head
from .autodiff import Tensor
from .deform import (
    DeformableKernel,
    deform_conv3d,
    gen_alpha,
    gen_offsets,
    init_kernel,
    offset_bound,
    pool_context,
)
from .errors import ConfigError, DimensionError, NumericError
from .patching import adjust_period, embed_channels, patchify, reshape_3d, unpatchify
from .spectral import dft_amplitudes, topk_periods


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters; everything the architecture leaves open."""

    lookback: int
    horizon: int
    channels: int
    embed_dim: int = 32
    scales: int = 2
    taps: int = 3
    hidden: int = 0  # 0 means 4 * embed_dim
    seed: int = 42

    def __post_init__(self):
        if self.lookback < 8:
            raise ConfigError(f"lookback must be >= 8, got {self.lookback}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not 1 <= self.scales <= self.lookback // 2:
            raise ConfigError(
                f"scales must be in 1..{self.lookback // 2} for lookback {self.lookback}, got {self.scales}"
            )
        for name in ("channels", "embed_dim", "taps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.hidden < 0:
            raise ConfigError(f"hidden must be non-negative, got {self.hidden}")

    @property
    def hidden_dim(self) -> int:
        return self.hidden if self.hidden else 4 * self.embed_dim

    @property
    def max_patch_len(self) -> int:
        # largest adjusted period: the full window, rounded up to even
        return self.lookback + (self.lookback % 2)


@dataclass
class ScaleParams:
    """Learned parameters owned by one scale."""

    patch_w: Tensor  # [max_patch_len, C_m, C_m]; first P taps used per window
    kernel: DeformableKernel


@dataclass
class ModelState:
    config: ModelConfig
    embed_w: Tensor = None
    embed_b: Tensor = None
    scale_params: list = field(default_factory=list)
    head: ForecastHead = None

    def named_parameters(self) -> dict:
        params = {"embed.w": self.embed_w, "embed.b": self.embed_b}
        for i, sp in enumerate(self.scale_params):
            params[f"scale{i}.patch.w"] = sp.patch_w
            params[f"scale{i}.deform.w_base"] = sp.kernel.w_base
            for head_name, head in (
                ("alpha_intra", sp.kernel.intra_head),
                ("alpha_inter", sp.kernel.inter_head),
                ("offset", sp.kernel.offset_head),
            ):
                for part, t in zip(("w1", "b1", "w2", "b2"), head.tensors()):
                    params[f"scale{i}.deform.{head_name}.{part}"] = t
        for part, t in zip(("w1", "b1", "w2", "b2"), self.head.tensors()):
            params[f"head.{part}"] = t
        return params

    def zero_grads(self):
        for t in self.named_parameters().values():
            t.zero_grad()


def parameter_count(config: ModelConfig) -> int:
    """Total learned scalars; a pure function of the configuration."""
    cm, kt = config.embed_dim, config.taps
    embed = config.channels * cm + cm
    head_pair = lambda d_in: d_in * cm + cm + cm * kt + kt
    per_scale = (
        config.max_patch_len * cm * cm
        + kt * cm * cm
        + head_pair(cm) * 2
        + head_pair(2 * cm)
    )
    hid = config.hidden_dim
    out = config.horizon * config.channels
    head = config.lookback * cm * hid + hid + hid * out + out
    return embed + config.scales * per_scale + head


def init_state(config: ModelConfig) -> ModelState:
    rng = np.random.default_rng(config.seed)
    cm = config.embed_dim
    s_embed = np.sqrt(1.0 / config.channels)
    sp = np.sqrt(1.0 / (config.max_patch_len * cm))
    state = ModelState(
        config=config,
        embed_w=Tensor(rng.uniform(-s_embed, s_embed, (config.channels, cm)), requires_grad=True),
        embed_b=Tensor(np.zeros(cm), requires_grad=True),
    )
    for _ in range(config.scales):
        patch_w = Tensor(
            rng.uniform(-sp, sp, (config.max_patch_len, cm, cm)), requires_grad=True
        )
        state.scale_params.append(ScaleParams(patch_w=patch_w, kernel=init_kernel(cm, config.taps, rng)))
    state.head = init_head(config.lookback, cm, config.hidden_dim, config.horizon, config.channels, rng)
    return state


def forward_window(state: ModelState, window: Tensor, diagnostics=None) -> Tensor:
    """One [L, C] window through the full pipeline, producing [horizon, C]."""
    cfg = state.config
    profile = topk_periods(dft_amplitudes(window.data), cfg.scales, cfg.lookback)
    x_emb = embed_channels(window, state.embed_w, state.embed_b)
    reps = []
    offsets = []
    for i, detected in enumerate(profile.periods):
        period = adjust_period(detected)
        sp = state.scale_params[i]
        patches = patchify(x_emb, period, sp.patch_w[:period])
        n = patches.shape[0]
        pt = reshape_3d(patches, pad_len=n * period - cfg.lookback)
        v_intra, v_inter = pool_context(pt)
        alpha = gen_alpha(v_intra, v_inter, sp.kernel)
        delta = gen_offsets(v_intra, v_inter, sp.kernel, offset_bound(detected))
        out_pt = deform_conv3d(pt, sp.kernel, alpha, delta)
        reps.append(unpatchify(out_pt, cfg.lookback))
        if diagnostics is not None:
            offsets.append(delta.data.copy())
    if diagnostics is not None:
        diagnostics.append({"profile": profile, "offsets": offsets})
    x_agg = aggregate(reps, profile)
    return forecast_head(x_agg, x_emb, state.head)


def forward(state: ModelState, x, diagnostics=None) -> Tensor:
    """Batched forward pass: [B, L, C] -> [B, horizon, C].

    The spectral profile is recomputed per sample, so patch lengths may
    differ across the batch while parameters stay fixed.
    """
    x = ad.as_tensor(x)
    cfg = state.config
    if x.ndim != 3 or x.shape[1] != cfg.lookback or x.shape[2] != cfg.channels:
        raise DimensionError(
            f"expected input [B, {cfg.lookback}, {cfg.channels}], got {x.shape}"
        )
    if not np.isfinite(x.data).all():
        raise NumericError("input window contains non-finite values")
    outs = [forward_window(state, x[b], diagnostics) for b in range(x.shape[0])]
    return ad.stack(outs, axis=0)


def loss_mse(pred: Tensor, target) -> Tensor:
    """Mean squared error over every element of the batch."""
    target = ad.as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {pred.shape} vs target {target.shape}")
    diff = ad.sub(pred, target)
    return ad.tensor_mean(ad.mul(diff, diff))
