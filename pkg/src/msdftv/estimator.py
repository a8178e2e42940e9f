"""Scikit-learn style estimator wrapping the forecasting engine."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import no_grad
from .data import DEFAULT_RATIOS, Dataset, split_normalize, window_dataset
from .errors import InsufficientDataError
from .model import ModelConfig, forward
from .training import evaluate, train
from .validation import check_series, check_windows


class DeformableForecaster(BaseEstimator):
    """Multi-scale deformable-convolution forecaster with a fit/predict API.

    ``fit`` takes the raw [T, C] series, splits it chronologically,
    normalizes with train statistics, and trains with Adam. ``predict``
    takes one [lookback, C] window or a batch [B, lookback, C] in original
    units and returns forecasts in original units.

    Parameters mirror the engine configuration; see :class:`ModelConfig`.
    """

    def __init__(
        self,
        lookback: int = 96,
        horizon: int = 24,
        scales: int = 2,
        embed_dim: int = 32,
        taps: int = 3,
        hidden: int = 0,
        epochs: int = 30,
        batch_size: int = 16,
        lr: float = 1e-4,
        clip_norm: float = 5.0,
        ratios: tuple = DEFAULT_RATIOS,
        seed: int = 42,
        verbose: bool = False,
    ):
        self.lookback = lookback
        self.horizon = horizon
        self.scales = scales
        self.embed_dim = embed_dim
        self.taps = taps
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.clip_norm = clip_norm
        self.ratios = ratios
        self.seed = seed
        self.verbose = verbose

    def _config(self, channels: int) -> ModelConfig:
        return ModelConfig(
            lookback=self.lookback,
            horizon=self.horizon,
            channels=channels,
            embed_dim=self.embed_dim,
            scales=self.scales,
            taps=self.taps,
            hidden=self.hidden,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        series = check_series(X)
        ds = split_normalize(
            Dataset(values=series, columns=[f"ch{i}" for i in range(series.shape[1])]),
            ratios=self.ratios,
        )
        config = self._config(series.shape[1])
        on_epoch = None
        if self.verbose:
            on_epoch = lambda row: print(
                f"epoch {row[0]}: train_mse={row[1]:.6g} val_mse={row[2]:.6g} lr={row[3]:.3g}"
            )
        result = train(
            config,
            ds,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            clip_norm=self.clip_norm,
            on_epoch=on_epoch,
        )
        if result.diverged:
            raise InsufficientDataError("training diverged; best finite parameters kept")
        self.state_ = result.state
        self.history_ = result.log
        self.norm_mean_ = ds.mean
        self.norm_std_ = ds.std
        self.n_features_in_ = series.shape[1]
        self._fit_dataset_ = ds
        return self

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        windows, squeezed = check_windows(X, self.lookback, self.n_features_in_)
        normed = (windows - self.norm_mean_) / self.norm_std_
        with no_grad():
            pred = forward(self.state_, normed).data
        out = pred * self.norm_std_ + self.norm_mean_
        return out[0] if squeezed else out

    def score(self, X, y) -> float:
        """Negative MSE in original units (higher is better)."""
        pred = self.predict(X)
        y = np.asarray(y, dtype=np.float64)
        return -float(((pred - y) ** 2).mean())

    def evaluate_split(self, split: str = "test"):
        """Metrics of the fitted model on a split of the training series."""
        self._check_fitted()
        windows = window_dataset(self._fit_dataset_, self.lookback, self.horizon)
        return evaluate(self.state_, windows[split])

    def _check_fitted(self):
        if not hasattr(self, "state_"):
            raise InsufficientDataError("estimator is not fitted; call fit first")
