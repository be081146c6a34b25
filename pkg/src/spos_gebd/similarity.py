"""Grouped pairwise similarity maps inside each encoded window."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .numerics import ContractError, Tensor, from_op, tensor

METRICS = ("cosine", "neg-euclidean", "neg-manhattan", "neg-chebyshev")
ALIASES = {"euclidean": "neg-euclidean", "manhattan": "neg-manhattan", "chebyshev": "neg-chebyshev"}
COSINE_EPS = 1e-8

# Vector-pair metric evaluations performed by similarity().
counters: Counter = Counter()


def canonical_metric(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in METRICS:
        raise ContractError(f"unknown similarity metric {name!r}; expected one of {METRICS}")
    return name


def group_split(x, groups: int) -> Tensor:
    """(B, L, C) -> (B, L, G, C/G); channel c goes to group c // (C/G)."""
    x = tensor(x)
    b, length, c = x.shape
    if groups < 1 or c % groups:
        raise ContractError(f"channels {c} not divisible by groups {groups}")
    return x.view(b, length, groups, c // groups)


def group_merge(xg) -> Tensor:
    xg = tensor(xg)
    b, length, g, cg = xg.shape
    return xg.view(b, length, g * cg)


def similarity(xg, metric: str = "cosine") -> Tensor:
    """Pairwise similarity of window positions per group.

    ``xg`` is (B, L, G, C'); the result is (B, G, L, L) with
    ``out[b, g, i, j] = metric(xg[b, i, g], xg[b, j, g])``.  Distances are
    negated so larger always means more similar.
    """
    xg = tensor(xg)
    metric = canonical_metric(metric)
    b, length, g, _ = xg.shape
    counters["pair_evaluations"] += b * g * length * length
    u = np.ascontiguousarray(np.transpose(xg.data, (0, 2, 1, 3)))  # (B, G, L, C')
    if metric == "cosine":
        out, back = _cosine(u)
    elif metric == "neg-euclidean":
        out, back = _euclidean(u)
    elif metric == "neg-manhattan":
        out, back = _manhattan(u)
    else:
        out, back = _chebyshev(u)

    def vjp(gout):
        gsym = gout + np.swapaxes(gout, -1, -2)
        return (np.transpose(back(gsym), (0, 2, 1, 3)),)

    return from_op(out, (xg,), vjp)


def group_similarity(x, groups: int, metric: str = "cosine") -> Tensor:
    return similarity(group_split(x, groups), metric)


def count_similarity_ops(padded_length: int, groups: int, window_length: int) -> int:
    return padded_length * groups * window_length * window_length


# Each helper returns the map and a function mapping the symmetrized upstream
# gradient (g + g^T) to the gradient w.r.t. u.  Summing both argument slots
# of a symmetric kernel is what makes the symmetrization valid.


def _cosine(u):
    dots = u @ np.swapaxes(u, -1, -2)
    norms = np.sqrt((u * u).sum(axis=-1))
    prod = norms[..., :, None] * norms[..., None, :]
    big = prod > COSINE_EPS
    denom = np.where(big, prod, COSINE_EPS)
    out = dots / denom

    def back(gs):
        coef = gs / denom
        grad = coef @ u
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_sq = np.where(norms > 0, 1.0 / (norms * norms), 0.0)
        radial = (np.where(big, gs * out, 0.0)).sum(axis=-1) * inv_sq
        return grad - radial[..., None] * u

    return out, back


def _euclidean(u):
    diff = u[..., :, None, :] - u[..., None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    out = -dist

    def back(gs):
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(dist > 0, -gs / dist, 0.0)
        return (scale[..., None] * diff).sum(axis=-2)

    return out, back


def _manhattan(u):
    diff = u[..., :, None, :] - u[..., None, :, :]
    out = -np.abs(diff).sum(axis=-1)

    def back(gs):
        return -(gs[..., None] * np.sign(diff)).sum(axis=-2)

    return out, back


def _chebyshev(u):
    diff = u[..., :, None, :] - u[..., None, :, :]
    mag = np.abs(diff)
    arg = mag.argmax(axis=-1)
    out = -np.take_along_axis(mag, arg[..., None], axis=-1)[..., 0]

    def back(gs):
        sel = np.take_along_axis(np.sign(diff), arg[..., None], axis=-1)[..., 0]
        contrib = np.zeros_like(diff)
        np.put_along_axis(contrib, arg[..., None], (-gs * sel)[..., None], axis=-1)
        return contrib.sum(axis=-2)

    return out, back
