"""Amplitude-weighted fusion of per-scale representations and forecast head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DimensionError
from .spectral import SpectralProfile


@dataclass(frozen=True)
class ScaleWeightSet:
    """Softmax-normalized spectral amplitudes used as fusion weights."""

    raw_amplitudes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        total = float(self.weights.sum())
        if abs(total - 1.0) > 1e-9:
            raise ContractError(f"weights sum to {total!r}, expected 1")
        if np.any(self.weights <= 0.0) or np.any(self.weights >= 1.0 + 1e-12):
            raise ContractError("weights must lie in (0, 1)")


def scale_weights(amplitudes) -> ScaleWeightSet:
    """Stable softmax over raw amplitudes; monotone in the inputs."""
    raw = np.asarray(amplitudes, dtype=np.float64)
    e = np.exp(raw - raw.max())
    return ScaleWeightSet(raw_amplitudes=raw, weights=e / e.sum())


def aggregate(reps, profile: SpectralProfile) -> Tensor:
    """Weighted sum of k same-shape representations.

    Weights are the softmax of the profile amplitudes and enter as
    constants: no gradient flows into the spectral selection.
    """
    if len(reps) != len(profile):
        raise ContractError(f"{len(reps)} representations for {len(profile)} profile entries")
    shape = reps[0].shape
    for r in reps[1:]:
        if r.shape != shape:
            raise DimensionError(f"representation shapes differ: {shape} vs {r.shape}")
    weights = scale_weights(profile.amplitudes).weights
    out = ad.mul(reps[0], float(weights[0]))
    for w, rep in zip(weights[1:], reps[1:]):
        out = ad.add(out, ad.mul(rep, float(w)))
    return out


@dataclass
class ForecastHead:
    """Flatten-and-project MLP mapping the fused window to the horizon."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    horizon: int
    channels: int

    def tensors(self):
        return (self.w1, self.b1, self.w2, self.b2)


def init_head(lookback: int, embed_dim: int, hidden: int, horizon: int, channels: int,
              rng: np.random.Generator) -> ForecastHead:
    in_dim = lookback * embed_dim
    s1 = np.sqrt(1.0 / in_dim)
    s2 = np.sqrt(1.0 / hidden)
    return ForecastHead(
        w1=Tensor(rng.uniform(-s1, s1, (in_dim, hidden)), requires_grad=True),
        b1=Tensor(np.zeros(hidden), requires_grad=True),
        w2=Tensor(rng.uniform(-s2, s2, (hidden, horizon * channels)), requires_grad=True),
        b2=Tensor(np.zeros(horizon * channels), requires_grad=True),
        horizon=horizon,
        channels=channels,
    )


def forecast_head(x_agg: Tensor, x_emb: Tensor, head: ForecastHead) -> Tensor:
    """Residual add of fused and embedded input, then a two-layer MLP."""
    if x_agg.shape != x_emb.shape:
        raise DimensionError(f"residual shapes differ: {x_agg.shape} vs {x_emb.shape}")
    length, embed_dim = x_emb.shape
    if length * embed_dim != head.w1.shape[0]:
        raise DimensionError(
            f"head expects flattened width {head.w1.shape[0]}, input is {length}x{embed_dim}"
        )
    flat = ad.reshape(ad.add(x_agg, x_emb), (1, length * embed_dim))
    hidden = ad.relu(ad.add(ad.matmul(flat, head.w1), head.b1))
    out = ad.add(ad.matmul(hidden, head.w2), head.b2)
    return ad.reshape(out, (head.horizon, head.channels))
