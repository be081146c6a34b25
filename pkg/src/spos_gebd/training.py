"""Soft labels, losses, SGD with momentum, step schedule and the epoch loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import Video
from .evaluation import AnnotationError, THRESHOLDS, EvalReport, evaluate, extract_boundaries
from .head import ScoreSequence
from .model import BoundaryModel
from .numerics import ContractError, Parameter, Tensor, concat, log, maximum, minimum, no_grad, tensor

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-7


@dataclass
class SoftLabelSequence:
    labels: np.ndarray  # (T,)
    sigma: float = 1.0
    truncation_radius: int = 3


@dataclass
class TrainConfig:
    loss: str = "bce"
    smoothing: bool = True
    sigma: float = 1.0
    truncation_radius: int = 3
    lr: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4
    epochs: int = 30
    lr_drops: tuple[int, ...] = (16, 24)
    drop_factor: float = 10.0
    batch_videos: int = 4
    seed: int = 0
    tau: float = 0.5  # validation peak threshold
    peak_radius: int = 2

    def __post_init__(self):
        if self.loss not in ("bce", "mse"):
            raise ContractError(f"loss must be 'bce' or 'mse', got {self.loss!r}")
        drops = tuple(self.lr_drops)
        if any(b <= a for a, b in zip(drops, drops[1:])):
            raise ContractError(f"lr_drops must be strictly increasing, got {drops}")
        if self.epochs and drops and drops[-1] >= self.epochs:
            raise ContractError(f"lr_drops {drops} must all be < epochs={self.epochs}")
        if self.batch_videos < 1:
            raise ContractError("batch_videos must be >= 1")
        self.lr_drops = drops


def _round_position(b: float) -> int:
    return int(math.floor(b + 0.5))


def _check_positions(boundaries, length: int, video_id: str) -> list[int]:
    out = []
    for b in boundaries:
        if not 0 <= b < length:
            raise AnnotationError(f"{video_id or '<video>'}: boundary {b} outside [0, {length})")
        out.append(min(_round_position(b), length - 1))
    return out


def soft_labels(boundaries, length: int, sigma: float = 1.0, radius: int = 3, video_id: str = "") -> SoftLabelSequence:
    """Sum of truncated Gaussians centred on the (rounded) boundaries, clamped to 1."""
    labels = np.zeros(length)
    for b in _check_positions(boundaries, length, video_id):
        lo, hi = max(0, b - radius), min(length, b + radius + 1)
        offsets = np.arange(lo, hi) - b
        labels[lo:hi] += np.exp(-(offsets**2) / (2.0 * sigma**2))
    return SoftLabelSequence(np.minimum(labels, 1.0), sigma, radius)


def hard_labels(boundaries, length: int, video_id: str = "") -> np.ndarray:
    labels = np.zeros(length)
    labels[_check_positions(boundaries, length, video_id)] = 1.0
    return labels


def video_labels(video: Video, cfg: TrainConfig) -> np.ndarray:
    """Training targets from all raters' boundaries pooled together."""
    pooled = [b for rater in video.annotation.raters for b in rater]
    t = video.length
    if cfg.smoothing:
        return soft_labels(pooled, t, cfg.sigma, cfg.truncation_radius, video.video_id).labels
    return hard_labels(pooled, t, video.video_id)


def loss(scores, labels, kind: str = "bce") -> Tensor:
    """Mean BCE (probabilities clipped to [1e-7, 1 - 1e-7]) or mean squared error."""
    p = scores.scores if isinstance(scores, ScoreSequence) else tensor(scores)
    y = labels.labels if isinstance(labels, SoftLabelSequence) else np.asarray(labels)
    if p.shape != y.shape:
        raise ContractError(f"scores shape {p.shape} != labels shape {y.shape}")
    y = tensor(y)
    if kind == "mse":
        d = p - y
        return (d * d).mean()
    if kind != "bce":
        raise ContractError(f"unknown loss {kind!r}")
    p = minimum(maximum(p, PROB_CLIP), 1.0 - PROB_CLIP)
    return -(y * log(p) + (1.0 - y) * log(1.0 - p)).mean()


def learning_rate(epoch: int, cfg: TrainConfig) -> float:
    drops = sum(1 for d in cfg.lr_drops if epoch >= d)
    return cfg.lr / cfg.drop_factor**drops


def sgd_step(params: Sequence[Parameter], state: dict, cfg: TrainConfig, lr: float) -> None:
    """v <- momentum * v + g + weight_decay * w;  w <- w - lr * v."""
    for p in params:
        if p.grad is None:
            raise ContractError(f"parameter {p.name!r} has no gradient")
        g = p.grad + cfg.weight_decay * p.data if cfg.weight_decay else p.grad
        v = state.get(p.name)
        v = g.copy() if v is None else cfg.momentum * v + g
        state[p.name] = v
        p.data = (p.data - lr * v).astype(p.data.dtype)


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    val_f1_005: float | None
    val_avg_f1: float | None
    lr: float

    def line(self) -> str:
        def fmt(v):
            return "-" if v is None else f"{v:.6f}"

        return f"{self.epoch}\t{self.mean_loss:.6f}\t{fmt(self.val_f1_005)}\t{fmt(self.val_avg_f1)}\t{self.lr:g}"


REPORT_HEADER = "# epoch\tmean_loss\tval_f1@0.05\tval_avg_f1\tlr"


@dataclass
class TrainingReport:
    records: list[EpochRecord] = field(default_factory=list)
    final_eval: EvalReport | None = None
    checkpoint: Path | None = None

    def text(self) -> str:
        return "\n".join([REPORT_HEADER] + [r.line() for r in self.records]) + "\n"


def predict(model: BoundaryModel, videos: Sequence[Video], batch: int = 8) -> dict[str, np.ndarray]:
    out = {}
    with no_grad():
        for start in range(0, len(videos), batch):
            chunk = videos[start : start + batch]
            for v, s in zip(chunk, model.forward([v.features for v in chunk])):
                out[v.video_id] = s.scores.data.astype(np.float64)
    return out


def evaluate_model(model: BoundaryModel, videos: Sequence[Video], tau: float = 0.5, radius: int = 2, aggregate: str = "video-mean") -> EvalReport:
    scores = predict(model, videos)
    dets = {vid: extract_boundaries(s, tau, radius) for vid, s in scores.items()}
    return evaluate(dets, {v.video_id: v.annotation for v in videos}, THRESHOLDS, aggregate)


def train_loop(
    train_set: Sequence[Video],
    model: BoundaryModel,
    cfg: TrainConfig,
    val_set: Sequence[Video] | None = None,
    checkpoint_path=None,
    report_path=None,
) -> TrainingReport:
    if not train_set:
        raise ContractError("training set is empty")
    rng = np.random.default_rng(cfg.seed)
    targets = {v.video_id: video_labels(v, cfg) for v in train_set}
    params = model.parameters()
    state: dict = {}
    report = TrainingReport()
    for epoch in range(cfg.epochs):
        lr = learning_rate(epoch, cfg)
        order = rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), cfg.batch_videos):
            batch = [train_set[i] for i in order[start : start + cfg.batch_videos]]
            model.zero_grad()
            scores = model.forward([v.features for v in batch])
            probs = concat([s.scores for s in scores], axis=0)
            labels = np.concatenate([targets[v.video_id] for v in batch])
            value = loss(probs, labels, cfg.loss)
            value.backward()
            sgd_step(params, state, cfg, lr)
            losses.append(value.item())
        f005 = avg = None
        if val_set:
            ev = evaluate_model(model, val_set, cfg.tau, cfg.peak_radius)
            report.final_eval = ev
            f005, avg = ev.f1_at(0.05), ev.avg_f1
        rec = EpochRecord(epoch, float(np.mean(losses)), f005, avg, lr)
        report.records.append(rec)
        logger.info("epoch %d loss %.5f val F1@0.05 %s avg %s lr %g", epoch, rec.mean_loss, f005, avg, lr)
        if report_path is not None:
            _write(report_path, report.text())
    if cfg.epochs > 0 and checkpoint_path is not None:
        model.save(checkpoint_path)
        report.checkpoint = Path(checkpoint_path)
    if report_path is not None:
        _write(report_path, report.text())
    return report


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write training report {path}: {exc.strerror}") from exc
