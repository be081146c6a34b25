"""Dense tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a row-major numpy array.  Every differentiable
operation records its parents and a vector-Jacobian product closure;
:meth:`Tensor.backward` walks the recorded graph in reverse topological
order and accumulates gradients into leaf tensors that require them.
"""

from __future__ import annotations

import contextlib
import math
from collections import Counter
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "DimensionError",
    "ContractError",
    "DomainError",
    "warning_counts",
    "precision",
    "no_grad",
    "get_dtype",
    "set_dtype",
    "tensor",
    "zeros",
    "ones",
    "from_op",
    "matmul",
    "elementwise",
    "reduce",
    "view",
    "permute",
    "concat",
    "stack",
    "exp",
    "log",
    "sqrt",
    "sigmoid",
    "relu",
    "tanh",
    "maximum",
    "minimum",
]


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ContractError(ValueError):
    """A documented precondition was violated."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


# Counts events that are tolerated but worth surfacing (e.g. division by zero).
warning_counts: Counter = Counter()

_dtype = np.dtype(np.float32)


def get_dtype() -> np.dtype:
    return _dtype


def set_dtype(dtype) -> None:
    global _dtype
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ContractError(f"unsupported precision {dtype}")
    _dtype = dtype


@contextlib.contextmanager
def precision(bits: int):
    """Temporarily switch the default float precision (32 or 64)."""
    previous = _dtype
    set_dtype({32: np.float32, 64: np.float64}[bits])
    try:
        yield
    finally:
        set_dtype(previous)


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build results without recording the graph (inference only)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


VJP = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype != _dtype:
            arr = arr.astype(_dtype)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: VJP | None = None

    # -- introspection -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._vjp is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else float("nan")

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # -- autodiff ----------------------------------------------------------
    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``.

        Repeated calls accumulate; call :meth:`zero_grad` to reset.
        """
        if self.size != 1:
            raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._vjp is None:
                if node.requires_grad:
                    node.grad += g
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if pg.shape != parent.shape:
                    raise DimensionError(
                        f"internal gradient shape {pg.shape} != {parent.shape}"
                    )
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", other, self)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __rsub__(self, other):
        return elementwise("sub", other, self)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", other, self)

    def __truediv__(self, other):
        return elementwise("div", self, other)

    def __rtruediv__(self, other):
        return elementwise("div", other, self)

    def __neg__(self):
        return elementwise("mul", self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return _getitem(self, index)

    def sum(self, axis=None):
        return reduce("sum", self, axis)

    def mean(self, axis=None):
        return reduce("mean", self, axis)

    def max(self, axis=None):
        return reduce("max", self, axis)

    def view(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return view(self, shape)

    reshape = view

    def permute(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return permute(self, axes)

    def transpose(self, a: int = -2, b: int = -1):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return permute(self, axes)


class Parameter(Tensor):
    """A trainable leaf tensor with a checkpoint name."""

    __slots__ = ("name",)

    def __init__(self, data, name: str = ""):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


# -- construction helpers ---------------------------------------------------
def tensor(data, requires_grad: bool = False) -> Tensor:
    return data if isinstance(data, Tensor) else Tensor(data, requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=_dtype), requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape, dtype=_dtype), requires_grad)


def from_op(data: np.ndarray, parents: Iterable[Tensor], vjp: VJP) -> Tensor:
    """Wrap the result of a custom forward computation.

    ``vjp(g)`` receives the upstream gradient (same shape as ``data``) and
    returns one gradient array (or ``None``) per parent, in order.
    """
    parents = tuple(parents)
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data)
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    out.grad = None
    out._parents = parents if out.requires_grad else ()
    out._vjp = vjp if out.requires_grad else None
    return out


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_dtype))


# -- broadcasting -----------------------------------------------------------
def _check_leading_broadcast(shape: tuple, out: tuple) -> None:
    """Only a leading run of unit (or missing) extents may broadcast."""
    padded = (1,) * (len(out) - len(shape)) + tuple(shape)
    i = 0
    while i < len(padded) and padded[i] == 1:
        i += 1
    if padded[i:] != tuple(out[i:]):
        raise DimensionError(f"cannot broadcast {shape} to {out}: only leading unit extents broadcast")


def _broadcast_shape(a: tuple, b: tuple) -> tuple:
    try:
        out = np.broadcast_shapes(a, b)
    except ValueError as exc:
        raise DimensionError(f"shapes {a} and {b} do not broadcast") from exc
    _check_leading_broadcast(a, out)
    _check_leading_broadcast(b, out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    lead = g.ndim - len(shape)
    if lead:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- matmul -----------------------------------------------------------------
def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading batch axes may broadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} @ {b.shape}")
    _broadcast_shape(a.shape[:-2], b.shape[:-2])
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if a.ndim > 2 and b.ndim == 2:
                # fold batch axes into rows: one GEMM instead of a batched one
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return from_op(out, (a, b), vjp)


# -- elementwise ------------------------------------------------------------
_BINARY = ("add", "sub", "mul", "div")
_UNARY = ("exp", "log", "sqrt", "sigmoid", "relu", "tanh", "max-with-scalar", "min-with-scalar")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def elementwise(kind: str, a, b=None) -> Tensor:
    """Apply an elementwise operation ``kind`` to ``a`` (and ``b``).

    Binary kinds: add, sub, mul, div.  Unary kinds: exp, log, sqrt, sigmoid,
    relu, tanh, and max-with-scalar / min-with-scalar (``b`` is the scalar).
    """
    if kind in _BINARY:
        if b is None:
            raise ContractError(f"{kind} needs two operands")
        return _binary(kind, _as_tensor(a), _as_tensor(b))
    if kind not in _UNARY:
        raise ContractError(f"unknown elementwise op {kind!r}")
    a = _as_tensor(a)
    x = a.data
    if kind == "exp":
        out = np.exp(x)
        return from_op(out, (a,), lambda g: (g * out,))
    if kind == "log":
        if np.any(x <= 0):
            raise DomainError("log of nonpositive value")
        return from_op(np.log(x), (a,), lambda g: (g / x,))
    if kind == "sqrt":
        if np.any(x < 0):
            raise DomainError("sqrt of negative value")
        out = np.sqrt(x)
        with np.errstate(divide="ignore"):
            return from_op(out, (a,), lambda g: (g * 0.5 / out,))
    if kind == "sigmoid":
        out = _sigmoid(x)
        return from_op(out, (a,), lambda g: (g * out * (1.0 - out),))
    if kind == "relu":
        out = np.maximum(x, x.dtype.type(0))
        return from_op(out, (a,), lambda g: (np.multiply(g, out > 0, dtype=g.dtype),))
    if kind == "tanh":
        out = np.tanh(x)
        return from_op(out, (a,), lambda g: (g * (1.0 - out * out),))
    if b is None or isinstance(b, Tensor):
        raise ContractError(f"{kind} needs a python scalar bound")
    c = x.dtype.type(b)
    if kind == "max-with-scalar":
        mask = x >= c
        return from_op(np.maximum(x, c), (a,), lambda g: (g * mask,))
    mask = x <= c
    return from_op(np.minimum(x, c), (a,), lambda g: (g * mask,))


def _binary(kind: str, a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a.shape, b.shape)
    x, y = a.data, b.data
    if kind == "add":
        out = x + y
        return from_op(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))
    if kind == "sub":
        out = x - y
        return from_op(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))
    if kind == "mul":
        out = x * y
        return from_op(
            out,
            (a, b),
            lambda g: (
                _unbroadcast(g * y, a.shape) if a.requires_grad else None,
                _unbroadcast(g * x, b.shape) if b.requires_grad else None,
            ),
        )
    zero = y == 0
    if np.any(zero):
        warning_counts["div_by_zero"] += int(np.count_nonzero(zero))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x / y

    def vjp(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            ga = _unbroadcast(g / y, a.shape) if a.requires_grad else None
            gb = _unbroadcast(-g * out / y, b.shape) if b.requires_grad else None
        return ga, gb

    return from_op(out, (a, b), vjp)


def exp(a):
    return elementwise("exp", a)


def log(a):
    return elementwise("log", a)


def sqrt(a):
    return elementwise("sqrt", a)


def sigmoid(a):
    return elementwise("sigmoid", a)


def relu(a):
    return elementwise("relu", a)


def tanh(a):
    return elementwise("tanh", a)


def maximum(a, scalar: float):
    return elementwise("max-with-scalar", a, scalar)


def minimum(a, scalar: float):
    return elementwise("min-with-scalar", a, scalar)


# -- reductions -------------------------------------------------------------
def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ContractError(f"axis {ax} out of range for rank {ndim}")
        out.append(ax % ndim)
    return tuple(sorted(set(out)))


def reduce(kind: str, a, axis=None) -> Tensor:
    """Reduce ``a`` along ``axis`` (int, tuple, or None for all) with sum/mean/max.

    ``max`` routes the gradient to the first maximal index.
    """
    a = _as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    if any(a.shape[ax] == 0 for ax in axes):
        raise DomainError(f"cannot {kind}-reduce an empty axis of shape {a.shape}")
    kept = tuple(1 if i in axes else s for i, s in enumerate(a.shape))
    if kind == "sum":
        out = a.data.sum(axis=axes)
        return from_op(out, (a,), lambda g: (np.broadcast_to(g.reshape(kept), a.shape).copy(),))
    if kind == "mean":
        n = math.prod(a.shape[ax] for ax in axes)
        out = a.data.mean(axis=axes)
        return from_op(
            out, (a,), lambda g: (np.broadcast_to(g.reshape(kept) / n, a.shape).copy(),)
        )
    if kind != "max":
        raise ContractError(f"unknown reduction {kind!r}")
    # move reduced axes last and flatten them so argmax picks the first index
    rest = tuple(i for i in range(a.ndim) if i not in axes)
    moved = np.transpose(a.data, rest + axes)
    flat = moved.reshape(moved.shape[: len(rest)] + (-1,))
    idx = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def vjp(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[..., None], g[..., None], axis=-1)
        gm = gflat.reshape(moved.shape)
        return (np.transpose(gm, np.argsort(rest + axes)),)

    return from_op(out, (a,), vjp)


# -- shape manipulation -----------------------------------------------------
def view(a, shape) -> Tensor:
    """Reinterpret the row-major value sequence of ``a`` with a new shape."""
    a = _as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if shape.count(-1) == 1:
        known = math.prod(s for s in shape if s != -1)
        if known == 0 or a.size % known:
            raise DimensionError(f"cannot view {a.shape} as {shape}")
        shape = tuple(a.size // known if s == -1 else s for s in shape)
    if math.prod(shape) != a.size:
        raise DimensionError(f"cannot view {a.shape} ({a.size} values) as {shape}")
    src = a.shape
    return from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def permute(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(ax % a.ndim for ax in axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ContractError(f"invalid permutation {axes} for rank {a.ndim}")
    inverse = tuple(np.argsort(axes))
    return from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def concat(parts: Sequence, axis: int = 0) -> Tensor:
    """Concatenate along ``axis``; the gradient is sliced back to each part."""
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ContractError("concat needs at least one part")
    ndim = parts[0].ndim
    axis = axis % ndim
    for p in parts[1:]:
        if p.ndim != ndim or any(
            p.shape[i] != parts[0].shape[i] for i in range(ndim) if i != axis
        ):
            raise DimensionError(
                f"concat shapes differ off axis {axis}: {[q.shape for q in parts]}"
            )
    out = np.concatenate([p.data for p in parts], axis=axis)
    bounds = np.cumsum([0] + [p.shape[axis] for p in parts])

    def vjp(g):
        index = [slice(None)] * ndim
        grads = []
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            index[axis] = slice(lo, hi)
            grads.append(g[tuple(index)] if p.requires_grad else None)
        return grads

    return from_op(out, parts, vjp)


def stack(parts: Sequence, axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    axis = axis % (parts[0].ndim + 1)
    expanded = [view(p, p.shape[:axis] + (1,) + p.shape[axis:]) for p in parts]
    return concat(expanded, axis=axis)


def _getitem(a: Tensor, index) -> Tensor:
    out = a.data[index]
    advanced = _is_advanced(index)
    if not advanced:
        out = out.copy()

    def vjp(g):
        full = np.zeros_like(a.data)
        if advanced:
            np.add.at(full, index, g)
        else:
            full[index] = g
        return (full,)

    return from_op(np.asarray(out), (a,), vjp)


def _is_advanced(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)
