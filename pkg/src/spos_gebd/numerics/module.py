"""Parameter containers."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .tensor import Parameter, Tensor, get_dtype, matmul


def uniform(rng: np.random.Generator, shape, fan_in: int, gain: float = 1.0) -> np.ndarray:
    """Draw from U(-sqrt(gain/fan_in), +sqrt(gain/fan_in))."""
    bound = np.sqrt(gain / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(get_dtype())


class Module:
    """Base class; parameters are discovered from instance attributes."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            yield from _walk(value, prefix + attr)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def assign_names(self) -> None:
        for name, p in self.named_parameters():
            p.name = name

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _walk(value, path: str):
    if isinstance(value, Parameter):
        yield path, value
    elif isinstance(value, Module):
        yield from value.named_parameters(path + ".")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{path}.{i}")


class Linear(Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, out_dim: int):
        self.weight = Parameter(uniform(rng, (in_dim, out_dim), in_dim))
        self.bias = Parameter(uniform(rng, (out_dim,), in_dim))

    def forward(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias
