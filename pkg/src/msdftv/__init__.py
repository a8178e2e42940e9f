"""Multi-scale deformable-convolution forecasting engine."""

from .autodiff import Tensor, backward, no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, generate_synthetic, load_csv, save_csv, split_normalize, window_dataset
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    InsufficientDataError,
    MsdftvError,
    NumericError,
)
from .estimator import DeformableForecaster
from .model import ModelConfig, ModelState, forward, init_state, loss_mse, parameter_count
from .spectral import SpectralProfile, dft_amplitudes, topk_periods
from .training import EvalReport, TrainResult, evaluate, persistence_mse, train

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "no_grad",
    "load_checkpoint",
    "save_checkpoint",
    "Dataset",
    "generate_synthetic",
    "load_csv",
    "save_csv",
    "split_normalize",
    "window_dataset",
    "ConfigError",
    "ContractError",
    "DataFormatError",
    "DimensionError",
    "InsufficientDataError",
    "MsdftvError",
    "NumericError",
    "DeformableForecaster",
    "ModelConfig",
    "ModelState",
    "forward",
    "init_state",
    "loss_mse",
    "parameter_count",
    "SpectralProfile",
    "dft_amplitudes",
    "topk_periods",
    "EvalReport",
    "TrainResult",
    "evaluate",
    "persistence_mse",
    "train",
    "__version__",
]
