from .tensor import *  # noqa: F401,F403
from .tensor import __all__ as _tensor_all
from .functional import conv1d, conv2d, layer_norm, softmax
from .module import Linear, Module, uniform
from . import checkpoint

__all__ = list(_tensor_all) + [
    "conv1d",
    "conv2d",
    "layer_norm",
    "softmax",
    "Linear",
    "Module",
    "uniform",
    "checkpoint",
]
