"""Instrumented operation counts for the partition and similarity stages."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import similarity, spos
from .encoder import attention_cost, global_attention_cost
from .numerics import no_grad


@dataclass
class BenchRow:
    frames: int  # T
    padded: int  # T'
    context_ops: int  # measured frame copies in pad + slicing
    context_ops_formula: int  # (2K+1) T'
    pair_evaluations: int  # measured similarity evaluations
    pair_formula: int  # T' G L^2
    local_cost: int  # 4T'C^2 + 2L^2T'C
    global_cost: int  # 4TC^2 + 2T^2C

    def as_dict(self) -> dict:
        return asdict(self)


def measure(frames: int, window: int, channels: int, groups: int, seed: int = 0) -> BenchRow:
    """Partition a random T x C sequence and evaluate group similarity over every T' window."""
    x = np.random.default_rng(seed).standard_normal((frames, channels))
    ctx_before = spos.counters["frame_copies"]
    pair_before = similarity.counters["pair_evaluations"]
    with no_grad():
        p = spos.pad(x, window)
        ctx = spos.structured_context(p, spos.build_slices(p))
        ctx_ops = spos.counters["frame_copies"] - ctx_before
        similarity.group_similarity(ctx, groups, "cosine")
    pairs = similarity.counters["pair_evaluations"] - pair_before
    tp, length = p.padded_length, 2 * window + 1
    return BenchRow(
        frames=frames,
        padded=tp,
        context_ops=ctx_ops,
        context_ops_formula=spos.context_ops_closed_form(frames, window),
        pair_evaluations=pairs,
        pair_formula=similarity.count_similarity_ops(tp, groups, length),
        local_cost=attention_cost(length, channels, tp),
        global_cost=global_attention_cost(frames, channels),
    )


def crossover_length(window: int, channels: int, limit: int = 1 << 20) -> int | None:
    """Smallest T at which local attention cost drops below global cost."""
    length = 2 * window + 1
    for t in range(1, limit):
        if attention_cost(length, channels, spos.padded_length(t, window)) < global_attention_cost(t, channels):
            return t
    return None


def format_table(rows: list[BenchRow]) -> str:
    cols = list(BenchRow.__dataclass_fields__)
    cells = [cols] + [[str(getattr(r, c)) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells)
