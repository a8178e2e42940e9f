"""Adam optimization, stagnation-halving LR schedule, metrics, training loop."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .data import Dataset, window_dataset
from .errors import ContractError, NumericError
from .model import ModelConfig, ModelState, forward, init_state, loss_mse


@dataclass
class OptimizerState:
    """Adam moments plus the stagnation bookkeeping for the LR schedule."""

    lr: float
    m: dict
    v: dict
    step: int = 0
    best_loss: float = float("inf")
    stagnant_epochs: int = 0

    @classmethod
    def create(cls, params: dict, lr: float = 1e-4) -> "OptimizerState":
        return cls(
            lr=lr,
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
        )


def adam_step(params: dict, opt: OptimizerState, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; parameters with no gradient are skipped."""
    for name, t in params.items():
        if t.grad is not None and not np.isfinite(t.grad).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    opt.step += 1
    c1 = 1.0 - beta1 ** opt.step
    c2 = 1.0 - beta2 ** opt.step
    for name, t in params.items():
        g = t.grad
        if g is None:
            g = np.zeros_like(t.data)
        m = opt.m[name]
        v = opt.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        t.data -= opt.lr * (m / c1) / (np.sqrt(v / c2) + eps)


def lr_schedule(opt: OptimizerState, epoch_val_loss: float, patience: int = 3,
                factor: float = 0.5, min_lr: float = 1e-6, min_improve: float = 1e-6):
    """Halve the rate after `patience` epochs without meaningful improvement."""
    if not np.isfinite(epoch_val_loss):
        raise NumericError(f"validation loss is not finite: {epoch_val_loss}")
    if epoch_val_loss < opt.best_loss - min_improve:
        opt.best_loss = epoch_val_loss
        opt.stagnant_epochs = 0
        return
    opt.stagnant_epochs += 1
    if opt.stagnant_epochs >= patience:
        opt.lr = max(opt.lr * factor, min_lr)
        opt.stagnant_epochs = 0


def clip_gradients(params: dict, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for t in params.values():
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for t in params.values():
            if t.grad is not None:
                t.grad = t.grad * scale
    return norm


@dataclass
class EvalReport:
    """Micro-averaged metrics over every element of every window."""

    mse: float
    mae: float
    step_mse: np.ndarray  # [horizon]
    count: int

    def __post_init__(self):
        if self.mse < 0 or self.mae < 0:
            raise ContractError("metrics must be non-negative")
        if self.mae * self.mae > self.mse * (1.0 + 1e-12) + 1e-300:
            raise ContractError(f"mae^2={self.mae**2!r} exceeds mse={self.mse!r}")


def _batches(windows, batch_size):
    for start in range(0, len(windows), batch_size):
        chunk = windows[start : start + batch_size]
        yield np.stack([w[0] for w in chunk]), np.stack([w[1] for w in chunk])


def evaluate(state: ModelState, windows, batch_size: int = 64) -> EvalReport:
    """MSE/MAE plus the per-horizon-step error curve for a window list."""
    if not windows:
        raise ContractError("evaluate needs at least one window")
    sq_sum = 0.0
    abs_sum = 0.0
    step_sq = np.zeros(state.config.horizon)
    elements = 0
    with no_grad():
        for x, y in _batches(windows, batch_size):
            err = forward(state, x).data - y
            sq_sum += float((err * err).sum())
            abs_sum += float(np.abs(err).sum())
            step_sq += (err * err).sum(axis=(0, 2))
            elements += err.size
    per_step = len(windows) * state.config.channels
    return EvalReport(
        mse=sq_sum / elements,
        mae=abs_sum / elements,
        step_mse=step_sq / per_step,
        count=len(windows),
    )


@dataclass
class TrainResult:
    state: ModelState
    log: list = field(default_factory=list)  # rows: (epoch, train_mse, val_mse, lr)
    best_epoch: int = 0
    best_val: float = float("inf")
    diverged: bool = False


def _snapshot(params: dict) -> dict:
    return {k: t.data.copy() for k, t in params.items()}


def _restore(params: dict, snap: dict):
    for k, t in params.items():
        t.data[...] = snap[k]


def train(
    config: ModelConfig,
    dataset: Dataset,
    epochs: int,
    batch_size: int,
    lr: float = 1e-4,
    clip_norm: float = 5.0,
    patience: int = 3,
    lr_factor: float = 0.5,
    min_lr: float = 1e-6,
    on_epoch=None,
) -> TrainResult:
    """Mini-batch Adam over shuffled train windows with a best-val snapshot.

    The returned state carries the best-validation parameters. If the train
    loss goes non-finite the loop stops and the last finite snapshot is
    kept (``diverged`` is set).
    """
    windows = window_dataset(dataset, config.lookback, config.horizon)
    state = init_state(config)
    params = state.named_parameters()
    opt = OptimizerState.create(params, lr=lr)
    rng = np.random.default_rng(config.seed)
    result = TrainResult(state=state)
    best = _snapshot(params)
    n_train = len(windows.train)

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n_train)
        shuffled = [windows.train[i] for i in order]
        sq_sum = 0.0
        seen = 0
        for x, y in _batches(shuffled, batch_size):
            state.zero_grads()
            loss = loss_mse(forward(state, Tensor(x)), Tensor(y))
            value = loss.item()
            if not np.isfinite(value):
                _restore(params, best)
                result.diverged = True
                return result
            ad.backward(loss)
            if clip_norm and clip_norm > 0:
                clip_gradients(params, clip_norm)
            adam_step(params, opt)
            sq_sum += value * x.shape[0]
            seen += x.shape[0]
        train_mse = sq_sum / seen
        val_mse = evaluate(state, windows.val).mse
        lr_schedule(opt, val_mse, patience=patience, factor=lr_factor, min_lr=min_lr)
        result.log.append((epoch, train_mse, val_mse, opt.lr))
        if val_mse < result.best_val:
            result.best_val = val_mse
            result.best_epoch = epoch
            best = _snapshot(params)
        if on_epoch is not None:
            on_epoch(result.log[-1])

    _restore(params, best)
    return result


def persistence_mse(windows) -> float:
    """Naive last-value-repeat baseline over the same windows."""
    sq_sum = 0.0
    elements = 0
    for x, y in windows:
        err = y - x[-1][None, :]
        sq_sum += float((err * err).sum())
        elements += err.size
    return sq_sum / elements
