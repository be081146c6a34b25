"""Similarity-map FCN with average pooling, and the 1D convolutional scorer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ContractError, Module, Parameter, Tensor, conv1d, conv2d, get_dtype, relu, sigmoid, tensor, uniform


@dataclass
class HeadConfig:
    fcn_channels: tuple[int, ...] | None = None  # default (32, 64, 128, C)
    fcn_kernel: int = 3
    scorer_channels: tuple[int, ...] | None = None  # default (C/2, C/4, 1)
    scorer_kernel: int = 3
    activation: str = "relu"

    def resolve(self, channels: int) -> "HeadConfig":
        fcn = tuple(self.fcn_channels) if self.fcn_channels else (32, 64, 128, channels)
        scorer = (
            tuple(self.scorer_channels)
            if self.scorer_channels
            else (max(channels // 2, 1), max(channels // 4, 1), 1)
        )
        if len(fcn) != 4 or fcn[-1] != channels:
            raise ContractError(f"FCN needs 4 stages ending at C={channels}, got {fcn}")
        if len(scorer) != 3 or scorer[-1] != 1:
            raise ContractError(f"scorer needs 3 stages ending at 1 channel, got {scorer}")
        if self.fcn_kernel % 2 == 0 or self.scorer_kernel % 2 == 0:
            raise ContractError("kernel sizes must be odd for same padding")
        if self.activation != "relu":
            raise ContractError(f"unsupported activation {self.activation!r}")
        return HeadConfig(fcn, self.fcn_kernel, scorer, self.scorer_kernel, self.activation)


@dataclass
class ScoreSequence:
    scores: Tensor  # (T,), in (0, 1)
    real_length: int

    def numpy(self) -> np.ndarray:
        return self.scores.data


# He-uniform bound sqrt(6 / fan_in) keeps activation scale through the
# seven stacked ReLU convs; the narrower default bound shrinks h_t ~1e4x.
HE_GAIN = 6.0


class ConvLayer(Module):
    def __init__(self, rng, kernel_shape: tuple[int, ...], cin: int, cout: int):
        fan_in = int(np.prod(kernel_shape)) * cin
        self.weight = Parameter(uniform(rng, (*kernel_shape, cin, cout), fan_in, HE_GAIN))
        self.bias = Parameter(np.zeros(cout, dtype=get_dtype()))


class SimilarityFCN(Module):
    """Four same-padded conv + ReLU stages over the L x L plane, then mean pooling."""

    def __init__(self, cfg: HeadConfig, groups: int, rng: np.random.Generator):
        k = cfg.fcn_kernel
        widths = (groups,) + tuple(cfg.fcn_channels)
        self.stages = [ConvLayer(rng, (k, k), a, b) for a, b in zip(widths[:-1], widths[1:])]
        self.groups = groups

    def forward(self, maps: Tensor) -> Tensor:
        if maps.ndim != 4 or maps.shape[1] != self.groups or maps.shape[2] != maps.shape[3]:
            raise ContractError(f"FCN expects (B, {self.groups}, L, L), got {maps.shape}")
        x = maps.permute(0, 2, 3, 1)  # channels last
        for stage in self.stages:
            x = relu(conv2d(x, stage.weight, stage.bias))
        return x.mean(axis=(1, 2))


class Scorer(Module):
    """Three same-padded 1D convs over the frame axis; sigmoid on the last."""

    def __init__(self, cfg: HeadConfig, channels: int, rng: np.random.Generator):
        widths = (channels,) + tuple(cfg.scorer_channels)
        k = cfg.scorer_kernel
        self.stages = [ConvLayer(rng, (k,), a, b) for a, b in zip(widths[:-1], widths[1:])]

    def logits(self, h: Tensor) -> Tensor:
        h = tensor(h)
        if h.ndim != 2 or h.shape[0] < 1:
            raise ContractError(f"scorer expects (T, C) with T >= 1, got {h.shape}")
        x = h
        for i, stage in enumerate(self.stages):
            x = conv1d(x, stage.weight, stage.bias)
            if i < len(self.stages) - 1:
                x = relu(x)
        return x.view(h.shape[0])

    def forward(self, h: Tensor) -> ScoreSequence:
        return ScoreSequence(sigmoid(self.logits(h)), h.shape[0])
