"""Versioned binary checkpoints: named parameters plus run metadata.

Layout: magic line ``MSDFTV1``, a length-prefixed JSON header (config,
normalization stats, split ratios, parameter names and shapes), then the
raw row-major float64 payload in header order. Binary float64 makes the
save/load round trip bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DataFormatError
from .model import ModelConfig, ModelState, init_state

MAGIC = b"MSDFTV1\n"


def save_checkpoint(state: ModelState, path, norm=None, ratios=None):
    params = state.named_parameters()
    header = {
        "config": {
            "lookback": state.config.lookback,
            "horizon": state.config.horizon,
            "channels": state.config.channels,
            "embed_dim": state.config.embed_dim,
            "scales": state.config.scales,
            "taps": state.config.taps,
            "hidden": state.config.hidden,
            "seed": state.config.seed,
        },
        "norm": None
        if norm is None
        else {"mean": [float(v) for v in norm["mean"]], "std": [float(v) for v in norm["std"]]},
        "ratios": None if ratios is None else [float(r) for r in ratios],
        "params": [{"name": k, "shape": list(v.shape)} for k, v in params.items()],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{len(blob)}\n".encode("ascii"))
        fh.write(blob)
        for v in params.values():
            fh.write(np.ascontiguousarray(v.data).tobytes())


def load_checkpoint(path):
    """Returns (state, meta) where meta carries norm stats and split ratios."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DataFormatError(f"{path}: not a MSDFTV1 checkpoint")
        try:
            size = int(fh.readline().strip())
            header = json.loads(fh.read(size).decode("utf-8"))
        except (ValueError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: corrupt checkpoint header ({exc})") from None
        state = init_state(ModelConfig(**header["config"]))
        params = state.named_parameters()
        recorded = {p["name"]: tuple(p["shape"]) for p in header["params"]}
        if set(recorded) != set(params):
            raise DataFormatError(f"{path}: parameter names do not match the configuration")
        for p in header["params"]:
            t = params[p["name"]]
            if tuple(p["shape"]) != t.shape:
                raise DataFormatError(
                    f"{path}: {p['name']} has shape {p['shape']}, expected {list(t.shape)}"
                )
            n = int(np.prod(p["shape"])) * 8
            raw = fh.read(n)
            if len(raw) != n:
                raise DataFormatError(f"{path}: truncated payload at {p['name']}")
            t.data[...] = np.frombuffer(raw, dtype=np.float64).reshape(t.shape)
    meta = {"norm": header.get("norm"), "ratios": header.get("ratios")}
    return state, meta
