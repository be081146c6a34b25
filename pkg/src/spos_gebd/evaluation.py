"""Boundary extraction and Rel.Dis. precision / recall / F1.

A detection d may match a ground-truth boundary g when
``|d - g| / instance_length <= threshold``.  True positives are the size of
a maximum one-to-one matching under that predicate.  For each video the
rater giving the highest F1 is kept; videos are then averaged (or pooled).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(1, 11))
AGGREGATES = ("video-mean", "corpus-pool")


class AnnotationError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass
class AnnotationSet:
    video_id: str
    instance_length: float
    raters: list[list[float]]

    def __post_init__(self):
        if not self.raters:
            raise AnnotationError(f"{self.video_id}: at least one rater required")
        if self.instance_length <= 0:
            raise AnnotationError(f"{self.video_id}: instance_length must be positive")
        for r, positions in enumerate(self.raters):
            for b in positions:
                if not 0 <= b < self.instance_length:
                    raise AnnotationError(
                        f"{self.video_id}: rater {r} boundary {b} outside [0, {self.instance_length})"
                    )


@dataclass
class EvalReport:
    thresholds: tuple[float, ...]
    precision: list[float]
    recall: list[float]
    f1: list[float]
    videos: int = 0
    aggregate: str = "video-mean"
    per_video: dict = field(default_factory=dict, repr=False)

    @property
    def avg_f1(self) -> float:
        return float(np.mean(self.f1))

    @property
    def avg_precision(self) -> float:
        return float(np.mean(self.precision))

    @property
    def avg_recall(self) -> float:
        return float(np.mean(self.recall))

    def f1_at(self, threshold: float) -> float:
        return self.f1[self.thresholds.index(threshold)]

    def to_table(self) -> str:
        head = ["Rel.Dis. threshold"] + [f"{t:g}" for t in self.thresholds] + ["avg"]
        rows = [
            ["precision"] + self.precision + [self.avg_precision],
            ["recall"] + self.recall + [self.avg_recall],
            ["F1"] + self.f1 + [self.avg_f1],
        ]
        cells = [head] + [[r[0]] + [f"{v:.3f}" for v in r[1:]] for r in rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(head))]
        return "\n".join(
            "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
            for row in cells
        )

    def to_record(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "videos": self.videos,
            "thresholds": list(self.thresholds),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "avg_precision": self.avg_precision,
            "avg_recall": self.avg_recall,
            "avg_f1": self.avg_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2)


def extract_boundaries(scores, tau: float = 0.5, radius: int = 2) -> list[int]:
    """Local maxima of ``scores`` at or above ``tau``.

    Frame t qualifies when ``scores[t] >= tau`` and no frame within
    ``radius`` scores higher.  A run of equal qualifying peaks emits only
    its first index.
    """
    s = np.asarray(getattr(scores, "data", scores), dtype=np.float64).reshape(-1)
    n = len(s)
    peaks = []
    for t in range(n):
        lo, hi = max(0, t - radius), min(n, t + radius + 1)
        if s[t] >= tau and s[lo:hi].max() <= s[t]:
            peaks.append(t)
    kept: list[int] = []
    for i, t in enumerate(peaks):
        if i and peaks[i - 1] == t - 1 and s[t - 1] == s[t]:
            continue
        kept.append(t)
    return kept


def count_matches(dets: Sequence[float], gts: Sequence[float], instance_length: float, threshold: float) -> int:
    """Size of a maximum one-to-one matching with |d - g| / length <= threshold.

    Every detection's feasible set is an interval of the same width, so
    scanning detections in order and taking the earliest unmatched feasible
    ground truth is optimal.
    """
    d = sorted(dets)
    g = sorted(gts)
    j = tp = 0
    for x in d:
        while j < len(g) and g[j] < x and abs(x - g[j]) / instance_length > threshold:
            j += 1
        if j < len(g) and abs(x - g[j]) / instance_length <= threshold:
            tp += 1
            j += 1
    return tp


def _prf(tp: int, n_det: int, n_gt: int) -> tuple[float, float, float]:
    if n_det == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    p = tp / n_det if n_det else 0.0
    r = tp / n_gt if n_gt else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def match_f1(dets, gts, instance_length: float, threshold: float) -> tuple[float, float, float]:
    """(precision, recall, F1) of detections against one rater."""
    if threshold <= 0:
        raise EvaluationError(f"threshold must be positive, got {threshold}")
    tp = count_matches(dets, gts, instance_length, threshold)
    return _prf(tp, len(dets), len(gts))


def evaluate(
    preds: Mapping[str, Sequence[float]],
    annos: Mapping[str, AnnotationSet],
    thresholds: Sequence[float] = THRESHOLDS,
    aggregate: str = "video-mean",
) -> EvalReport:
    """Score detections per video against the best-matching rater.

    ``video-mean`` averages per-video precision/recall/F1; ``corpus-pool``
    sums TP and counts over videos (using each video's best rater).
    """
    if aggregate not in AGGREGATES:
        raise EvaluationError(f"aggregate must be one of {AGGREGATES}, got {aggregate!r}")
    missing = sorted(set(preds) - set(annos))
    if missing:
        raise EvaluationError(f"no annotation for predicted videos: {', '.join(missing)}")
    if not preds:
        raise EvaluationError("no predictions to evaluate")
    thresholds = tuple(thresholds)
    ids = sorted(preds)
    per_video: dict[str, list[tuple[float, float, float]]] = {}
    pooled = np.zeros((len(thresholds), 3))  # tp, det, gt
    for vid in ids:
        anno, dets = annos[vid], list(preds[vid])
        rows = []
        for ti, thr in enumerate(thresholds):
            best = None
            for rater in anno.raters:
                tp = count_matches(dets, rater, anno.instance_length, thr)
                prf = _prf(tp, len(dets), len(rater))
                if best is None or prf[2] > best[0][2]:
                    best = (prf, tp, len(rater))
            rows.append(best[0])
            pooled[ti] += (best[1], len(dets), best[2])
        per_video[vid] = rows
    if aggregate == "video-mean":
        arr = np.array([per_video[v] for v in ids])  # (V, thresholds, 3)
        mean = arr.mean(axis=0)
        p, r, f = mean[:, 0], mean[:, 1], mean[:, 2]
    else:
        stats = [_prf(int(tp), int(nd), int(ng)) for tp, nd, ng in pooled]
        p, r, f = (np.array(col) for col in zip(*stats))
    return EvalReport(
        thresholds=thresholds,
        precision=[float(v) for v in p],
        recall=[float(v) for v in r],
        f1=[float(v) for v in f],
        videos=len(ids),
        aggregate=aggregate,
        per_video=per_video,
    )
