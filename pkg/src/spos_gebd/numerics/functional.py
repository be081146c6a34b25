"""Fused differentiable operations with hand-written backward passes."""

from __future__ import annotations

import numpy as np

from .tensor import ContractError, DimensionError, Tensor, _as_tensor, from_op

# Rows per GEMM block in the convolution kernels; keeps temporaries cache-resident.
_BLOCK_ROWS = 4096


def softmax(x, axis: int = -1) -> Tensor:
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return from_op(out, (x,), vjp)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(f"layer_norm affine shapes {gamma.shape}, {beta.shape} != ({c},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def vjp(g):
        lead = tuple(range(g.ndim - 1))
        dxhat = g * gamma.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return from_op(out, (x, gamma, beta), vjp)


def _tap_offsets(kh: int, kw: int, wp: int) -> list[int]:
    ph, pw = kh // 2, kw // 2
    return [(i - ph) * wp + (j - pw) for i in range(kh) for j in range(kw)]


def conv2d(x, weight, bias=None) -> Tensor:
    """Stride-1 "same" convolution, channels last.

    ``x`` is (N, H, W, Cin), ``weight`` is (kh, kw, Cin, Cout) with odd kernel
    extents, ``bias`` is (Cout,).  Borders are zero padded.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"conv2d expects (N,H,W,C) and (kh,kw,Cin,Cout), got {x.shape}, {weight.shape}")
    n, h, w, cin = x.shape
    kh, kw, wcin, cout = weight.shape
    if wcin != cin:
        raise DimensionError(f"conv2d input has {cin} channels, kernel expects {wcin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ContractError(f"conv2d needs odd kernel extents, got {kh}x{kw}")
    ph, pw = kh // 2, kw // 2
    hp, wp = h + 2 * ph, w + 2 * pw
    dtype = x.data.dtype
    xp = np.zeros((n, hp, wp, cin), dtype=dtype)
    xp[:, ph : ph + h, pw : pw + w] = x.data
    flat = xp.reshape(-1, cin)
    rows = flat.shape[0]
    margin = ph * wp + pw
    offsets = _tap_offsets(kh, kw, wp)
    taps = weight.data.reshape(kh * kw, cin, cout)

    acc = np.zeros((rows, cout), dtype=dtype)
    tmp = np.empty((_BLOCK_ROWS, cout), dtype=dtype)
    for s in range(margin, rows - margin, _BLOCK_ROWS):
        e = min(s + _BLOCK_ROWS, rows - margin)
        block, t = acc[s:e], tmp[: e - s]
        for k, off in enumerate(offsets):
            np.matmul(flat[s + off : e + off], taps[k], out=t)
            block += t
    out = acc.reshape(n, hp, wp, cout)[:, ph : ph + h, pw : pw + w]
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (cout,):
            raise DimensionError(f"conv2d bias shape {bias.shape} != ({cout},)")
        out = out + bias.data
    else:
        out = np.ascontiguousarray(out)

    def vjp(gy):
        gp = np.zeros((n, hp, wp, cout), dtype=gy.dtype)
        gp[:, ph : ph + h, pw : pw + w] = gy
        gflat = gp.reshape(-1, cout)
        gw = np.zeros_like(taps) if weight.requires_grad else None
        gx = np.zeros((rows, cin), dtype=gy.dtype) if x.requires_grad else None
        taps_t = np.ascontiguousarray(taps.transpose(0, 2, 1))
        tmp_x = np.empty((_BLOCK_ROWS, cin), dtype=gy.dtype)
        for s in range(margin, rows - margin, _BLOCK_ROWS):
            e = min(s + _BLOCK_ROWS, rows - margin)
            gblock = gflat[s:e]
            for k, off in enumerate(offsets):
                if gw is not None:
                    gw[k] += flat[s + off : e + off].T @ gblock
                if gx is not None:
                    t = tmp_x[: e - s]
                    np.matmul(gblock, taps_t[k], out=t)
                    gx[s + off : e + off] += t
        dx = None
        if gx is not None:
            dx = np.ascontiguousarray(gx.reshape(n, hp, wp, cin)[:, ph : ph + h, pw : pw + w])
        dw = gw.reshape(weight.shape) if gw is not None else None
        if bias is None:
            return dx, dw
        return dx, dw, gy.sum(axis=(0, 1, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return from_op(out, parents, vjp)


def conv1d(x, weight, bias=None) -> Tensor:
    """Stride-1 "same" convolution over a sequence, channels last.

    ``x`` is (N, T, Cin) or (T, Cin); ``weight`` is (k, Cin, Cout), k odd.
    """
    x, weight = _as_tensor(x), _as_tensor(weight)
    squeeze = x.ndim == 2
    if squeeze:
        x = x.view(1, *x.shape)
    if x.ndim != 3 or weight.ndim != 3:
        raise DimensionError(f"conv1d expects (N,T,C) and (k,Cin,Cout), got {x.shape}, {weight.shape}")
    x4 = x.view(x.shape[0], 1, x.shape[1], x.shape[2])
    w4 = weight.view(1, *weight.shape)
    out = conv2d(x4, w4, bias)
    out = out.view(x.shape[0], x.shape[1], weight.shape[-1])
    return out.view(out.shape[1:]) if squeeze else out
