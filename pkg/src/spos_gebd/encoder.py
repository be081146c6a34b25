"""Temporal models applied independently to each context window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (
    ContractError,
    Linear,
    Module,
    Parameter,
    Tensor,
    concat,
    get_dtype,
    layer_norm,
    relu,
    sigmoid,
    softmax,
    stack,
    tanh,
    tensor,
    uniform,
)

KINDS = ("transformer", "gru", "lstm")
POSITIONAL = ("sinusoidal", "learned", "none")


@dataclass
class EncoderConfig:
    kind: str = "transformer"
    layers: int = 6
    model_dim: int = 256
    heads: int = 4
    ffn_dim: int | None = None  # defaults to 4 * model_dim
    positional: str = "sinusoidal"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"encoder kind must be one of {KINDS}, got {self.kind!r}")
        if self.positional not in POSITIONAL:
            raise ContractError(f"positional must be one of {POSITIONAL}, got {self.positional!r}")
        if self.layers < 1:
            raise ContractError("encoder needs at least one layer")
        if self.kind == "transformer" and self.model_dim % self.heads:
            raise ContractError(f"model_dim {self.model_dim} not divisible by heads {self.heads}")

    @property
    def ffn_width(self) -> int:
        return self.ffn_dim or 4 * self.model_dim


def sinusoidal_table(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(pos * rate)
    table[:, 1::2] = np.cos(pos * rate)[:, : dim // 2]
    return table


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gain = Parameter(np.ones(dim, dtype=get_dtype()))
        self.shift = Parameter(np.zeros(dim, dtype=get_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.shift)


class SelfAttention(Module):
    def __init__(self, rng, dim: int, heads: int):
        self.heads = heads
        self.qkv = Linear(rng, dim, 3 * dim)
        self.out = Linear(rng, dim, dim)
        self.last_weights: np.ndarray | None = None

    def forward(self, x: Tensor) -> Tensor:
        b, length, dim = x.shape
        h, d = self.heads, dim // self.heads
        qkv = self.qkv(x).view(b, length, 3, h, d).permute(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]  # (B, H, L, d)
        scores = (q @ k.transpose()) * (1.0 / np.sqrt(d))
        weights = softmax(scores, axis=-1)
        self.last_weights = weights.data
        mixed = (weights @ v).permute(0, 2, 1, 3).view(b, length, dim)
        return self.out(mixed)


class TransformerLayer(Module):
    """Post-norm block: x = LN(x + MHSA(x)); x = LN(x + FFN(x))."""

    def __init__(self, rng, dim: int, heads: int, ffn_dim: int):
        self.attn = SelfAttention(rng, dim, heads)
        self.norm1 = LayerNorm(dim)
        self.ff1 = Linear(rng, dim, ffn_dim)
        self.ff2 = Linear(rng, ffn_dim, dim)
        self.norm2 = LayerNorm(dim)

    def forward(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attn(x))
        return self.norm2(x + self.ff2(relu(self.ff1(x))))


class GRUCell(Module):
    def __init__(self, rng, in_dim: int, hidden: int):
        self.hidden = hidden
        self.inp = Linear(rng, in_dim, 3 * hidden)
        self.rec = Linear(rng, hidden, 3 * hidden)

    def run(self, x: Tensor, reverse: bool) -> list[Tensor]:
        b, length, _ = x.shape
        hd = self.hidden
        xin = self.inp(x)  # (B, L, 3H)
        h = tensor(np.zeros((b, hd), dtype=get_dtype()))
        outs: list[Tensor] = [None] * length  # type: ignore[list-item]
        steps = range(length - 1, -1, -1) if reverse else range(length)
        for t in steps:
            xt = xin[:, t]
            hr = self.rec(h)
            r = sigmoid(xt[:, :hd] + hr[:, :hd])
            z = sigmoid(xt[:, hd : 2 * hd] + hr[:, hd : 2 * hd])
            n = tanh(xt[:, 2 * hd :] + r * hr[:, 2 * hd :])
            h = n + z * (h - n)
            outs[t] = h
        return outs


class LSTMCell(Module):
    def __init__(self, rng, in_dim: int, hidden: int):
        self.hidden = hidden
        self.inp = Linear(rng, in_dim, 4 * hidden)
        self.rec = Linear(rng, hidden, 4 * hidden)

    def run(self, x: Tensor, reverse: bool) -> list[Tensor]:
        b, length, _ = x.shape
        hd = self.hidden
        xin = self.inp(x)
        h = tensor(np.zeros((b, hd), dtype=get_dtype()))
        c = h
        outs: list[Tensor] = [None] * length  # type: ignore[list-item]
        steps = range(length - 1, -1, -1) if reverse else range(length)
        for t in steps:
            gates = xin[:, t] + self.rec(h)
            i = sigmoid(gates[:, :hd])
            f = sigmoid(gates[:, hd : 2 * hd])
            g = tanh(gates[:, 2 * hd : 3 * hd])
            o = sigmoid(gates[:, 3 * hd :])
            c = f * c + i * g
            h = o * tanh(c)
            outs[t] = h
        return outs


class BiRNNLayer(Module):
    """Forward and backward passes over the window, concatenated then projected to C."""

    def __init__(self, rng, dim: int, cell: str):
        cls = GRUCell if cell == "gru" else LSTMCell
        self.fwd = cls(rng, dim, dim)
        self.bwd = cls(rng, dim, dim)
        self.proj = Linear(rng, 2 * dim, dim)

    def forward(self, x: Tensor) -> Tensor:
        f = stack(self.fwd.run(x, reverse=False), axis=1)
        b = stack(self.bwd.run(x, reverse=True), axis=1)
        return self.proj(concat([f, b], axis=-1))


class TemporalEncoder(Module):
    """Maps a batch of windows (B, L, C) to encoded windows of the same shape."""

    def __init__(self, cfg: EncoderConfig, window_length: int, rng: np.random.Generator):
        self.cfg = cfg
        self.window_length = window_length
        c = cfg.model_dim
        self.position = None
        if cfg.kind == "transformer":
            if cfg.positional == "learned":
                self.position = Parameter(uniform(rng, (window_length, c), c))
            elif cfg.positional == "sinusoidal":
                self.position = sinusoidal_table(window_length, c)
            self.layers = [TransformerLayer(rng, c, cfg.heads, cfg.ffn_width) for _ in range(cfg.layers)]
        else:
            self.layers = [BiRNNLayer(rng, c, cfg.kind) for _ in range(cfg.layers)]

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[1:] != (self.window_length, self.cfg.model_dim):
            raise ContractError(
                f"encoder expects (B, {self.window_length}, {self.cfg.model_dim}), got {x.shape}"
            )
        if self.position is not None:
            x = x + tensor(self.position)
        for layer in self.layers:
            x = layer(x)
        return x

    def attention_weights(self) -> list[np.ndarray]:
        """Softmax weights (B, H, L, L) of every transformer layer from the last forward."""
        return [layer.attn.last_weights for layer in self.layers if isinstance(layer, TransformerLayer)]


def attention_cost(window_length: int, channels: int, padded_length: int) -> int:
    """Local attention cost 4T'C^2 + 2L^2T'C."""
    return 4 * padded_length * channels**2 + 2 * window_length**2 * padded_length * channels


def global_attention_cost(length: int, channels: int) -> int:
    """Full-sequence attention cost 4TC^2 + 2T^2C."""
    return 4 * length * channels**2 + 2 * length**2 * channels
