"""Command-line interface: train, eval, predict, periods, gradcheck."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    DEFAULT_RATIOS,
    Dataset,
    generate_synthetic,
    load_csv,
    split_normalize,
    window_dataset,
)
from .errors import ConfigError, MsdftvError
from .gradcheck import SMALL_CONFIG, TINY_CONFIG, check_model
from .model import ModelConfig, forward
from .autodiff import no_grad
from .spectral import dft_amplitudes, topk_periods
from .training import evaluate, train

_SYNTH_KEYS = {
    "periods": ("periods", lambda s: [float(p) for p in s.split("|")]),
    "amplitudes": ("amplitudes", lambda s: [float(a) for a in s.split("|")]),
    "noise_std": ("noise_std", float),
    "total_len": ("total_len", int),
    "t_total": ("total_len", int),
    "channels": ("channels", int),
    "c": ("channels", int),
    "seed": ("seed", int),
}


def _parse_synthetic(spec: str) -> Dataset:
    """Spec text is comma-separated key=value pairs, or a file of such lines.

    List values use ``|`` separators, e.g. ``periods=24|12``.
    """
    if not spec:
        raise ConfigError("empty synthetic spec")
    path = Path(spec)
    if path.is_file():
        pairs = [ln.strip() for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    else:
        pairs = [p for p in spec.split(",") if p]
    kwargs = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"synthetic spec entry {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        key = key.strip().lower()
        if key not in _SYNTH_KEYS:
            raise ConfigError(f"unknown synthetic key {key!r}; known: {sorted(set(k for k, _ in _SYNTH_KEYS.values()))}")
        name, conv = _SYNTH_KEYS[key]
        kwargs[name] = conv(value.strip())
    if "periods" not in kwargs:
        raise ConfigError("synthetic spec needs at least periods=...")
    return generate_synthetic(**kwargs)


def _load_data(arg: str, has_header: bool = True, timestamp_col=None) -> Dataset:
    if arg.startswith("synthetic:"):
        return _parse_synthetic(arg[len("synthetic:") :])
    return load_csv(arg, has_header=has_header, timestamp_col=timestamp_col)


def _ratio_triple(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("ratios must be three comma-separated numbers")
    return tuple(parts)


def _add_csv_flags(p):
    p.add_argument("--no-header", action="store_true", help="CSV has no header row")
    p.add_argument("--timestamp-col", default=None, help="timestamp column name or index to exclude")


def _timestamp_col(args):
    col = args.timestamp_col
    if col is None:
        return None
    return int(col) if col.lstrip("-").isdigit() else col


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msdftv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True, help="CSV path or synthetic:<spec>")
    p.add_argument("--lookback", type=int, default=96)
    p.add_argument("--horizon", type=int, default=24)
    p.add_argument("--scales", type=int, default=2)
    p.add_argument("--embed", type=int, default=32)
    p.add_argument("--taps", type=int, default=3)
    p.add_argument("--hidden", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ratios", type=_ratio_triple, default=DEFAULT_RATIOS)
    p.add_argument("--no-clip", action="store_true", help="disable gradient norm clipping")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="also write the epoch CSV log here")
    _add_csv_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--curve", default=None, help="per-horizon-step MSE CSV (default <ckpt>.curve.csv)")
    _add_csv_flags(p)

    p = sub.add_parser("predict", help="forecast from one window of a series")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--at", type=int, default=None, help="window start row (default: last full window)")
    p.add_argument("--out", default=None, help="write the forecast CSV here instead of stdout")
    _add_csv_flags(p)

    p = sub.add_parser("periods", help="print the dominant periods of a window")
    p.add_argument("--data", required=True)
    p.add_argument("--lookback", type=int, default=96)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--at", type=int, default=None, help="window start row (default: last window)")
    _add_csv_flags(p)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    p.add_argument("--config", choices=("small", "tiny"), default="small")
    p.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_train(args) -> int:
    ds = _load_data(args.data, has_header=not args.no_header, timestamp_col=_timestamp_col(args))
    ds = split_normalize(ds, ratios=args.ratios)
    config = ModelConfig(
        lookback=args.lookback,
        horizon=args.horizon,
        channels=ds.channels,
        embed_dim=args.embed,
        scales=args.scales,
        taps=args.taps,
        hidden=args.hidden,
        seed=args.seed,
    )
    lines = ["epoch,train_mse,val_mse,lr"]
    print(lines[0])

    def on_epoch(row):
        line = f"{row[0]},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g}"
        lines.append(line)
        print(line)

    result = train(
        config,
        ds,
        epochs=args.epochs,
        batch_size=args.batch,
        lr=args.lr,
        clip_norm=0.0 if args.no_clip else 5.0,
        on_epoch=on_epoch,
    )
    if args.log:
        Path(args.log).write_text("\n".join(lines) + "\n")
    save_checkpoint(
        result.state,
        args.out,
        norm={"mean": ds.mean, "std": ds.std},
        ratios=args.ratios,
    )
    if result.diverged:
        print("warning: training diverged; checkpoint holds the last finite parameters", file=sys.stderr)
        return 1
    print(f"saved best-validation checkpoint (epoch {result.best_epoch}) to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    state, meta = load_checkpoint(args.ckpt)
    ds = _load_data(args.data, has_header=not args.no_header, timestamp_col=_timestamp_col(args))
    ratios = tuple(meta["ratios"]) if meta["ratios"] else DEFAULT_RATIOS
    ds = split_normalize(ds, ratios=ratios)
    if meta["norm"] is not None:
        # score in the training-time normalized space for comparable metrics
        raw = ds.values * ds.std + ds.mean
        ds = Dataset(
            values=(raw - np.asarray(meta["norm"]["mean"])) / np.asarray(meta["norm"]["std"]),
            columns=ds.columns,
            timestamps=ds.timestamps,
            train_end=ds.train_end,
            val_end=ds.val_end,
            mean=np.asarray(meta["norm"]["mean"]),
            std=np.asarray(meta["norm"]["std"]),
        )
    windows = window_dataset(ds, state.config.lookback, state.config.horizon)
    report = evaluate(state, windows[args.split])
    print(f"{report.mse:.17g},{report.mae:.17g}")
    curve_path = args.curve or f"{args.ckpt}.curve.csv"
    rows = ["step,mse"] + [f"{i + 1},{v:.17g}" for i, v in enumerate(report.step_mse)]
    Path(curve_path).write_text("\n".join(rows) + "\n")
    return 0


def _cmd_predict(args) -> int:
    state, meta = load_checkpoint(args.ckpt)
    ds = _load_data(args.data, has_header=not args.no_header, timestamp_col=_timestamp_col(args))
    lookback = state.config.lookback
    at = args.at if args.at is not None else ds.length - lookback
    if not 0 <= at <= ds.length - lookback:
        raise ConfigError(f"--at {at} leaves no full window in {ds.length} rows")
    window = ds.values[at : at + lookback]
    if meta["norm"] is not None:
        mean = np.asarray(meta["norm"]["mean"])
        std = np.asarray(meta["norm"]["std"])
    else:
        mean, std = np.zeros(ds.channels), np.ones(ds.channels)
    with no_grad():
        pred = forward(state, ((window - mean) / std)[None]).data[0]
    pred = pred * std + mean
    lines = [",".join(ds.columns)] + [",".join(f"{v:.17g}" for v in row) for row in pred]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_periods(args) -> int:
    ds = _load_data(args.data, has_header=not args.no_header, timestamp_col=_timestamp_col(args))
    lookback = args.lookback
    at = args.at if args.at is not None else ds.length - lookback
    if not 0 <= at <= ds.length - lookback:
        raise ConfigError(f"window of {lookback} rows at {at} does not fit {ds.length} rows")
    profile = topk_periods(dft_amplitudes(ds.values[at : at + lookback]), args.k, lookback)
    print("rank,frequency,period,amplitude")
    for rank, (f, p, a) in enumerate(
        zip(profile.frequencies, profile.periods, profile.amplitudes), start=1
    ):
        print(f"{rank},{f},{p},{a:.17g}")
    return 0


def _cmd_gradcheck(args) -> int:
    config = SMALL_CONFIG if args.config == "small" else TINY_CONFIG
    ok, report = check_model(config, seed=args.seed)
    for name, (param_ok, worst) in sorted(report.items()):
        print(f"{'ok  ' if param_ok else 'FAIL'} {name} worst={worst:.3g}")
    print(f"gradcheck {'passed' if ok else 'FAILED'} ({len(report)} parameters)")
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "predict": _cmd_predict,
        "periods": _cmd_periods,
        "gradcheck": _cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except MsdftvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
