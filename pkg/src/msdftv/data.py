"""CSV ingestion, chronological splits, train-statistics normalization,
sliding windows, and synthetic series generation."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataFormatError, InsufficientDataError

DEFAULT_RATIOS = (0.7, 0.1, 0.2)


@dataclass
class Dataset:
    """A multivariate series with optional split boundaries and norm stats.

    Normalization always uses train-split statistics so later splits see no
    information from their own range. Instances are treated as immutable.
    """

    values: np.ndarray  # [T, C] float64
    columns: list
    timestamps: list = None
    train_end: int = None
    val_end: int = None
    mean: np.ndarray = None
    std: np.ndarray = None

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    def split_slices(self):
        if self.train_end is None:
            raise ConfigError("dataset has not been split; call split_normalize first")
        return {
            "train": slice(0, self.train_end),
            "val": slice(self.train_end, self.val_end),
            "test": slice(self.val_end, self.length),
        }


def load_csv(path, has_header: bool = True, timestamp_col=None) -> Dataset:
    """Read a comma-separated series; row order preserved.

    ``timestamp_col`` may be a column index or (with a header) a name; that
    column is kept as opaque strings and excluded from the values.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = rows[0] if has_header else None
    data_rows = rows[1:] if has_header else rows
    if not data_rows:
        raise DataFormatError(f"{path}: no data rows")
    width = len(data_rows[0])

    ts_idx = None
    if timestamp_col is not None:
        if isinstance(timestamp_col, str):
            if header is None:
                raise ConfigError("timestamp column by name requires a header")
            if timestamp_col not in header:
                raise DataFormatError(f"{path}: no column named {timestamp_col!r}")
            ts_idx = header.index(timestamp_col)
        else:
            ts_idx = int(timestamp_col)
            if not 0 <= ts_idx < width:
                raise DataFormatError(f"{path}: timestamp column {ts_idx} out of range")

    offset = 2 if has_header else 1  # 1-based file row of the first data row
    values = np.zeros((len(data_rows), width - (0 if ts_idx is None else 1)))
    timestamps = [] if ts_idx is not None else None
    for r, row in enumerate(data_rows):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: row {r + offset} has {len(row)} cells, expected {width}"
            )
        c_out = 0
        for c, cell in enumerate(row):
            if c == ts_idx:
                timestamps.append(cell)
                continue
            try:
                values[r, c_out] = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: row {r + offset}, column {c + 1}: cannot parse {cell!r} as a number"
                ) from None
            c_out += 1

    if header is not None:
        columns = [h for i, h in enumerate(header) if i != ts_idx]
    else:
        columns = [f"ch{i}" for i in range(values.shape[1])]
    return Dataset(values=values, columns=columns, timestamps=timestamps)


def save_csv(ds: Dataset, path):
    """Write values (17 significant digits, so floats round-trip exactly)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        has_ts = ds.timestamps is not None
        writer.writerow((["timestamp"] if has_ts else []) + list(ds.columns))
        for r in range(ds.length):
            cells = [ds.timestamps[r]] if has_ts else []
            cells += [f"{v:.17g}" for v in ds.values[r]]
            writer.writerow(cells)


def split_normalize(ds: Dataset, ratios=DEFAULT_RATIOS) -> Dataset:
    """Chronological split plus per-channel z-score from train statistics.

    Channels whose train-split standard deviation is below 1e-8 are left
    unscaled (std forced to 1) with a warning.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"ratios must be three positive numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)!r}")
    t = ds.length
    train_end = int(t * ratios[0])
    val_end = int(t * (ratios[0] + ratios[1]))
    if not 0 < train_end < val_end <= t or val_end == t:
        raise InsufficientDataError(
            f"splitting {t} rows by {ratios} leaves an empty split "
            f"(boundaries {train_end}, {val_end})"
        )
    mean = ds.values[:train_end].mean(axis=0)
    std = ds.values[:train_end].std(axis=0)
    flat = std < 1e-8
    if flat.any():
        names = [ds.columns[i] for i in np.flatnonzero(flat)]
        warnings.warn(f"constant train-split channels normalized with std=1: {names}")
        std = np.where(flat, 1.0, std)
    return replace(
        ds,
        values=(ds.values - mean) / std,
        train_end=train_end,
        val_end=val_end,
        mean=mean,
        std=std,
    )


@dataclass
class SplitWindows:
    """Sliding (history, future) pairs per split; views into the dataset."""

    train: list
    val: list
    test: list

    def __getitem__(self, split):
        return getattr(self, split)


def window_dataset(ds: Dataset, lookback: int, horizon: int, stride: int = 1) -> SplitWindows:
    """Enumerate windows per split; windows never cross split boundaries."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    slices = ds.split_slices()
    out = {}
    for name, sl in slices.items():
        seg = ds.values[sl]
        count = seg.shape[0] - lookback - horizon + 1
        if count < 1:
            raise InsufficientDataError(
                f"{name} split has {seg.shape[0]} rows; needs at least {lookback + horizon} "
                f"for lookback {lookback} and horizon {horizon}"
            )
        out[name] = [
            (seg[t : t + lookback], seg[t + lookback : t + lookback + horizon])
            for t in range(0, count, stride)
        ]
    return SplitWindows(**out)


def generate_synthetic(
    periods,
    amplitudes=None,
    noise_std: float = 0.0,
    total_len: int = 400,
    channels: int = 1,
    seed: int = 0,
) -> Dataset:
    """Sum of sinusoids with per-channel random phases plus Gaussian noise."""
    periods = [float(p) for p in periods]
    if not periods or any(p <= 0 for p in periods):
        raise ConfigError(f"periods must be positive, got {periods}")
    if amplitudes is None:
        amplitudes = [1.0] * len(periods)
    amplitudes = [float(a) for a in amplitudes]
    if len(amplitudes) != len(periods):
        raise ConfigError("need one amplitude per period")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, (channels, len(periods)))
    t = np.arange(total_len)[:, None, None]  # [T, 1, 1]
    waves = np.asarray(amplitudes) * np.sin(
        2.0 * np.pi * t / np.asarray(periods) + phases[None, :, :]
    )  # [T, C, J]
    values = waves.sum(axis=2)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, values.shape)
    return Dataset(values=values, columns=[f"ch{i}" for i in range(channels)])
