"""Command-line surface: gen-data, train, predict, eval, bench."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench, data
from .data import FEATURE_SUFFIX, SCORE_SUFFIX, ConfigError, FormatError, SynthConfig
from .encoder import KINDS, EncoderConfig
from .evaluation import AGGREGATES, AnnotationError, EvaluationError, evaluate, extract_boundaries
from .head import HeadConfig
from .model import BoundaryModel, ModelConfig
from .numerics import ContractError, DimensionError, DomainError
from .numerics.checkpoint import CheckpointError
from .training import TrainConfig, predict, train_loop

log = logging.getLogger("spos_gebd")

METRIC_CHOICES = ("cosine", "euclidean", "manhattan", "chebyshev")
USER_ERRORS = (
    OSError,
    FormatError,
    ConfigError,
    AnnotationError,
    EvaluationError,
    ContractError,
    DimensionError,
    DomainError,
    CheckpointError,
)


class UsageError(Exception):
    pass


def worker_count() -> int:
    """SPOS_THREADS caps workers; 0 or unset means one per CPU."""
    raw = os.environ.get("SPOS_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SPOS_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise UsageError(f"SPOS_THREADS must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


def _need_dir(flag: str, path: Path) -> Path:
    if not path.is_dir():
        raise UsageError(f"{flag}: directory not found: {path}")
    return path


def _need_file(flag: str, path: Path) -> Path:
    if not path.is_file():
        raise UsageError(f"{flag}: file not found: {path}")
    return path


def _maybe_sample(videos: list[data.Video], target: int) -> list[data.Video]:
    if not target:
        return videos
    out = []
    for v in videos:
        feats, anno = data.sample_uniform(v.features, v.annotation, target)
        out.append(data.Video(v.video_id, feats, anno))
    return out


# -- subcommands ------------------------------------------------------------
def cmd_gen_data(args) -> int:
    cfg = SynthConfig(
        videos=args.videos,
        frames=args.frames,
        channels=args.channels,
        min_segments=args.min_segments,
        max_segments=args.max_segments,
        noise_sigma=args.noise,
        rater_count=args.raters,
        rater_jitter=args.jitter,
        seed=args.seed,
        id_prefix=args.id_prefix,
    )
    videos = data.generate(cfg)
    data.write_dataset(args.out, videos)
    print(f"wrote {len(videos)} videos to {args.out}")
    return 0


def cmd_train(args) -> int:
    train = data.load_dataset(_need_dir("--features", args.features), _need_file("--annos", args.annos))
    if not train:
        raise UsageError(f"--annos: no videos in {args.annos}")
    val = None
    if (args.val_features is None) != (args.val_annos is None):
        raise UsageError("--val-features and --val-annos must be given together")
    if args.val_features is not None:
        val = data.load_dataset(_need_dir("--val-features", args.val_features), _need_file("--val-annos", args.val_annos))
        val = _maybe_sample(val, args.sample_frames)
    train = _maybe_sample(train, args.sample_frames)

    feature_dim = train[0].features.shape[1]
    model_cfg = ModelConfig(
        window=args.k,
        channels=args.channels,
        groups=args.groups,
        similarity=args.similarity,
        feature_dim=feature_dim,
        right_edge=args.right_edge,
        encoder=EncoderConfig(kind=args.temporal_model, layers=args.layers, model_dim=args.channels, heads=args.heads),
        head=HeadConfig(fcn_channels=args.fcn_channels),
        seed=args.seed,
    )
    # drops at or past the last epoch would never fire
    drops = tuple(d for d in args.lr_drops if d < args.epochs)
    train_cfg = TrainConfig(
        loss=args.loss,
        smoothing=args.smoothing,
        sigma=args.sigma,
        lr=args.lr,
        momentum=args.momentum,
        weight_decay=args.weight_decay,
        epochs=args.epochs,
        lr_drops=drops,
        batch_videos=args.batch_videos,
        seed=args.seed,
        tau=args.tau,
    )
    report_path = args.report or args.out.with_name(args.out.name + ".report.txt")
    args.out.parent.mkdir(parents=True, exist_ok=True)
    report = train_loop(train, BoundaryModel(model_cfg), train_cfg, val, args.out, report_path)
    sys.stdout.write(report.text())
    if report.final_eval is not None:
        print(report.final_eval.to_table())
    return 0


def cmd_predict(args) -> int:
    model = BoundaryModel.load(_need_file("--ckpt", args.ckpt))
    feat_dir = _need_dir("--features", args.features)
    paths = sorted(feat_dir.glob(f"*{FEATURE_SUFFIX}"))
    if not paths:
        raise UsageError(f"--features: no {FEATURE_SUFFIX} files in {feat_dir}")
    args.out.mkdir(parents=True, exist_ok=True)
    videos, sources = [], {}
    for p in paths:
        feats = data.read_features(p)
        sources[p.stem] = feats.shape[0]
        if args.sample_frames:
            feats, _ = data.sample_uniform(feats, None, args.sample_frames)
        videos.append(data.Video(p.stem, feats, None))  # type: ignore[arg-type]
    scores = predict(model, videos)

    def write(vid):
        data.write_scores(args.out / f"{vid}{SCORE_SUFFIX}", vid, scores[vid], sources[vid])

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        list(pool.map(write, sorted(scores)))
    print(f"wrote {len(scores)} score files to {args.out}")
    return 0


def cmd_eval(args) -> int:
    pred_dir = _need_dir("--preds", args.preds)
    annos = data.read_annotations(_need_file("--annos", args.annos))
    paths = sorted(pred_dir.glob(f"*{SCORE_SUFFIX}"))
    if not paths:
        raise UsageError(f"--preds: no {SCORE_SUFFIX} files in {pred_dir}")
    dets = {}
    for p in paths:
        vid, scores, source_frames = data.read_scores(p)
        # detections on a resampled grid map back to source frame units
        scale = source_frames / len(scores) if len(scores) else 1.0
        dets[vid] = [t * scale for t in extract_boundaries(scores, args.tau, args.radius)]
    report = evaluate(dets, annos, aggregate=args.aggregate)
    print(report.to_table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n")
    return 0


def cmd_bench(args) -> int:
    rows = [bench.measure(t, args.k, args.channels, args.groups) for t in args.t_grid]
    print(bench.format_table(rows))
    first, last = rows[0], rows[-1]
    print(
        f"pair ratio {last.frames}:{first.frames} = {last.pair_evaluations / first.pair_evaluations:g}"
        f"  (T' ratio {last.padded / first.padded:g})"
    )
    cross = bench.crossover_length(args.k, args.channels)
    print(f"local attention cost < global from T = {cross} (K={args.k}, C={args.channels})")
    if args.json:
        Path(args.json).write_text(json.dumps([r.as_dict() for r in rows], indent=2) + "\n")
    return 0


# -- parser -----------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spos-gebd", description="Structured-context event boundary detection")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic change-point dataset")
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--videos", type=int, default=100)
    g.add_argument("--frames", type=int, default=100)
    g.add_argument("--channels", type=int, default=32)
    g.add_argument("--min-segments", type=int, default=2)
    g.add_argument("--max-segments", type=int, default=6)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--raters", type=int, default=5)
    g.add_argument("--jitter", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--id-prefix", default="video")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a boundary model")
    t.add_argument("--features", type=Path, required=True)
    t.add_argument("--annos", type=Path, required=True)
    t.add_argument("--val-features", type=Path)
    t.add_argument("--val-annos", type=Path)
    t.add_argument("--k", type=int, default=8)
    t.add_argument("--channels", type=int, default=256)
    t.add_argument("--groups", type=int, default=4)
    t.add_argument("--temporal-model", choices=KINDS, default="transformer")
    t.add_argument("--layers", type=int, default=6)
    t.add_argument("--heads", type=int, default=4)
    t.add_argument("--similarity", choices=METRIC_CHOICES, default="cosine")
    t.add_argument("--fcn-channels", type=_ints, default=None, help="4 widths, last = channels")
    t.add_argument("--right-edge", choices=("padded", "real"), default="padded")
    t.add_argument("--loss", choices=("bce", "mse"), default="bce")
    t.add_argument("--smoothing", type=_on_off, default=True, metavar="{on,off}")
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--lr", type=float, default=1e-2)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--weight-decay", type=float, default=1e-4)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr-drops", type=_ints, default=(16, 24))
    t.add_argument("--batch-videos", type=int, default=4)
    t.add_argument("--sample-frames", type=int, default=100, help="0 keeps every frame")
    t.add_argument("--tau", type=float, default=0.5)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=Path, required=True)
    t.add_argument("--report", type=Path)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-video score files")
    p.add_argument("--ckpt", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--sample-frames", type=int, default=100, help="0 keeps every frame")
    p.set_defaults(func=cmd_predict)

    e = sub.add_parser("eval", help="Rel.Dis. precision/recall/F1 of score files")
    e.add_argument("--preds", type=Path, required=True)
    e.add_argument("--annos", type=Path, required=True)
    e.add_argument("--tau", type=float, default=0.5)
    e.add_argument("--radius", type=int, default=2)
    e.add_argument("--aggregate", choices=AGGREGATES, default="video-mean")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="instrumented op counts vs T")
    b.add_argument("--k", type=int, default=8)
    b.add_argument("--channels", type=int, default=256)
    b.add_argument("--groups", type=int, default=4)
    b.add_argument("--t-grid", type=_ints, default=(100, 200, 400, 800))
    b.add_argument("--json", type=Path)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s"
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
