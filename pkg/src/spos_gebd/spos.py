"""Structured partition of a frame sequence into per-frame context windows.

The padded sequence is split into K residue-class slices.  For slice k the
left and right neighbourhoods of every candidate frame nK+k are produced by
shifting the whole sequence (replicating an edge frame) and reinterpreting
the result as an N x K x C block, so the total work is linear in T'.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .numerics import ContractError, Tensor, concat, tensor, zeros

# Frame vectors materialized by pad/build_slice; see context_ops_closed_form.
counters: Counter = Counter()


@dataclass
class PaddedSequence:
    frames: Tensor  # (T', C)
    real_length: int
    window: int

    @property
    def padded_length(self) -> int:
        return self.frames.shape[0]

    @property
    def slices(self) -> int:
        return self.padded_length // self.window


@dataclass
class SliceContext:
    slice_index: int
    left: Tensor  # (N, K, C)
    right: Tensor  # (N, K, C)
    candidate_indices: np.ndarray  # (N,), = k, k+K, ...


def pad(features, window: int) -> PaddedSequence:
    """Append zero frames so the length becomes a multiple of ``window``."""
    x = tensor(features)
    if window < 1:
        raise ContractError(f"window size K must be >= 1, got {window}")
    if x.ndim != 2 or x.shape[0] < 1:
        raise ContractError(f"expected a (T, C) sequence with T >= 1, got {x.shape}")
    t, c = x.shape
    padded = math.ceil(t / window) * window
    frames = concat([x, zeros((padded - t, c))], axis=0) if padded > t else concat([x], axis=0)
    counters["frame_copies"] += padded
    return PaddedSequence(frames, t, window)


def build_slice(p: PaddedSequence, k: int, right_edge: str = "padded") -> SliceContext:
    """Left/right context blocks for the candidates k, k+K, ... of ``p``.

    ``right_edge="padded"`` replicates the last padded frame (possibly a zero
    row); ``"real"`` replicates the last real frame instead.
    """
    K, tp = p.window, p.padded_length
    if not 0 <= k < K:
        raise ContractError(f"slice index {k} outside [0, {K})")
    if right_edge not in ("padded", "real"):
        raise ContractError(f"right_edge must be 'padded' or 'real', got {right_edge!r}")
    v = p.frames
    n, c = tp // K, v.shape[1]

    first = v[0:1]
    shift_l = K - k
    left = concat([first] * shift_l + [v[: tp - shift_l]], axis=0)

    # "padded" clamps right-context indices at T'-1, "real" at T-1
    end = tp if right_edge == "padded" else p.real_length
    last = v[end - 1 : end]
    body = [v[k + 1 : end]] if k + 1 < end else []
    right = concat(body + [last] * (tp - max(end - k - 1, 0)), axis=0)
    counters["frame_copies"] += 2 * tp

    return SliceContext(
        slice_index=k,
        left=left.view(n, K, c),
        right=right.view(n, K, c),
        candidate_indices=np.arange(k, tp, K),
    )


def build_slices(p: PaddedSequence, right_edge: str = "padded") -> list[SliceContext]:
    return [build_slice(p, k, right_edge) for k in range(p.window)]


def structured_context(p: PaddedSequence, slices: list[SliceContext]) -> Tensor:
    """Windows [left K frames, frame t, right K frames] for t = 0..T'-1.

    Returns a (T', 2K+1, C) tensor whose row t is the window of frame t.
    """
    K, tp = p.window, p.padded_length
    if sorted(s.slice_index for s in slices) != list(range(K)):
        raise ContractError("structured_context needs exactly one slice per residue class")
    n, c = tp // K, p.frames.shape[1]
    ordered = sorted(slices, key=lambda s: s.slice_index)
    per_slice = []
    for s in ordered:
        center = p.frames[s.slice_index :: K].view(n, 1, c)
        per_slice.append(concat([s.left, center, s.right], axis=1).view(n, 1, 2 * K + 1, c))
    # (N, K, L, C): row-major order over (n, k) is exactly t = nK + k
    return concat(per_slice, axis=1).view(tp, 2 * K + 1, c)


def windows(features, window: int, right_edge: str = "padded") -> Tensor:
    """Context windows of the real frames only, shape (T, 2K+1, C)."""
    p = pad(features, window)
    ctx = structured_context(p, build_slices(p, right_edge))
    return ctx[: p.real_length]


def padded_length(t: int, window: int) -> int:
    return math.ceil(t / window) * window


def context_ops_closed_form(t: int, window: int) -> int:
    """Frame copies made by pad plus all K build_slice calls: (2K+1) * T'."""
    return (2 * window + 1) * padded_length(t, window)


def count_context_ops(t: int, window: int, channels: int) -> int:
    """Run pad + every build_slice on a T x C sequence and count frame copies."""
    before = counters["frame_copies"]
    p = pad(np.zeros((t, channels)), window)
    build_slices(p)
    return counters["frame_copies"] - before
