"""Reduced configuration for the single-core synthetic benchmark.

Full-width defaults (C=256, 6 layers, FCN 32/64/128/C) stay in the config
dataclasses; this module only narrows what a desk CPU can train in minutes.
"""

from __future__ import annotations

from .encoder import EncoderConfig
from .head import HeadConfig
from .model import ModelConfig
from .training import TrainConfig

DESK_CHANNELS = 32
DESK_LAYERS = 2
DESK_FCN = (8, 8, 8, DESK_CHANNELS)


def desk_model_config(seed: int = 0, fcn_channels=None, **overrides) -> ModelConfig:
    kw = dict(
        window=8,
        channels=DESK_CHANNELS,
        groups=4,
        encoder=EncoderConfig(layers=DESK_LAYERS, model_dim=DESK_CHANNELS),
        head=HeadConfig(fcn_channels=tuple(fcn_channels or DESK_FCN)),
        seed=seed,
    )
    kw.update(overrides)
    return ModelConfig(**kw)


def desk_train_config(epochs: int = 30, seed: int = 0, **overrides) -> TrainConfig:
    drops = tuple(d for d in (16, 24) if d < epochs)
    kw = dict(epochs=epochs, lr_drops=drops, seed=seed)
    kw.update(overrides)
    return TrainConfig(**kw)


def desk_cli_flags(epochs: int = 30, seed: int = 0) -> list[str]:
    """``spos-gebd train`` flags equivalent to the two config helpers above."""
    return [
        "--k", "8", "--channels", str(DESK_CHANNELS), "--groups", "4", "--layers", str(DESK_LAYERS),
        "--fcn-channels", ",".join(map(str, DESK_FCN)), "--epochs", str(epochs), "--seed", str(seed),
    ]


# one axis varied at a time from the desk config; later flags override earlier ones
ABLATION_GRID: list[tuple[str, list[str]]] = (
    [(f"K={k}", ["--k", str(k)]) for k in (4, 8, 12)]
    + [(f"G={g}", ["--groups", str(g)]) for g in (1, 4)]
    + [(f"encoder={e}", ["--temporal-model", e]) for e in ("transformer", "gru", "lstm")]
    + [(f"metric={m}", ["--similarity", m]) for m in ("cosine", "euclidean", "manhattan", "chebyshev")]
    + [
        (f"loss={lo},smoothing={sm}", ["--loss", lo, "--smoothing", sm])
        for lo in ("bce", "mse")
        for sm in ("on", "off")
    ]
)
