"""Feature/annotation/score files, synthetic change-point videos, frame sampling."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .evaluation import AnnotationSet

FEATURE_MAGIC = b"SPOSFEAT"
FEATURE_VERSION = 1
FEATURE_SUFFIX = ".feat"
SCORE_SUFFIX = ".scores"


class ConfigError(ValueError):
    pass


class FormatError(ValueError):
    pass


@dataclass
class Video:
    video_id: str
    features: np.ndarray  # (T, C) float32
    annotation: AnnotationSet

    @property
    def length(self) -> int:
        return self.features.shape[0]


# -- feature files ----------------------------------------------------------
def encode_features(features: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(features, dtype="<f4")
    if arr.ndim != 2:
        raise FormatError(f"features must be (T, C), got shape {arr.shape}")
    t, c = arr.shape
    return FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, t, c) + arr.tobytes()


def decode_features(blob: bytes, source: str = "<bytes>") -> np.ndarray:
    if blob[:8] != FEATURE_MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:8]!r}")
    if len(blob) < 20:
        raise FormatError(f"{source}: truncated header")
    version, t, c = struct.unpack_from("<III", blob, 8)
    if version != FEATURE_VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    payload = blob[20:]
    if len(payload) != 4 * t * c:
        raise FormatError(f"{source}: payload is {len(payload)} bytes, expected {4 * t * c}")
    return np.frombuffer(payload, dtype="<f4").reshape(t, c).astype(np.float32)


def write_features(path, features: np.ndarray) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_features(features))
    except OSError as exc:
        raise OSError(f"cannot write feature file {path}: {exc.strerror}") from exc


def read_features(path) -> np.ndarray:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read feature file {path}: {exc.strerror}") from exc
    return decode_features(blob, str(path))


# -- annotation files -------------------------------------------------------
def dump_annotations(annos: Iterable[AnnotationSet]) -> str:
    records = [
        {"video_id": a.video_id, "instance_length": a.instance_length, "raters": a.raters}
        for a in annos
    ]
    return json.dumps({"version": 1, "videos": records}, indent=2) + "\n"


def parse_annotations(text: str, source: str = "<text>") -> dict[str, AnnotationSet]:
    try:
        doc = json.loads(text)
        records = doc["videos"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{source}: not an annotation document ({exc})") from exc
    out: dict[str, AnnotationSet] = {}
    for rec in records:
        try:
            anno = AnnotationSet(rec["video_id"], rec["instance_length"], [list(r) for r in rec["raters"]])
        except KeyError as exc:
            raise FormatError(f"{source}: record missing field {exc}") from exc
        if anno.video_id in out:
            raise FormatError(f"{source}: duplicate video id {anno.video_id!r}")
        out[anno.video_id] = anno
    return out


def write_annotations(path, annos: Iterable[AnnotationSet]) -> None:
    path = Path(path)
    try:
        path.write_text(dump_annotations(annos))
    except OSError as exc:
        raise OSError(f"cannot write annotation file {path}: {exc.strerror}") from exc


def read_annotations(path) -> dict[str, AnnotationSet]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read annotation file {path}: {exc.strerror}") from exc
    return parse_annotations(text, str(path))


# -- score files ------------------------------------------------------------
def write_scores(path, video_id: str, scores: np.ndarray, source_frames: int) -> None:
    lines = [f"# video_id={video_id} source_frames={source_frames}"]
    lines += [f"{float(v):.9g}" for v in np.asarray(scores).reshape(-1)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_scores(path) -> tuple[str, np.ndarray, int]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read score file {path}: {exc.strerror}") from exc
    if not lines or not lines[0].startswith("#"):
        raise FormatError(f"{path}: missing score header")
    meta = dict(item.split("=", 1) for item in lines[0][1:].split())
    values = np.array([float(v) for v in lines[1:] if v.strip()])
    return meta["video_id"], values, int(meta["source_frames"])


# -- datasets ---------------------------------------------------------------
def write_dataset(directory, videos: list[Video]) -> None:
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    for v in videos:
        write_features(directory / "features" / f"{v.video_id}{FEATURE_SUFFIX}", v.features)
    write_annotations(directory / "annotations.json", [v.annotation for v in videos])


def load_dataset(features_dir, annos_path) -> list[Video]:
    """Pair every annotated video with its feature file, sorted by id."""
    annos = read_annotations(annos_path)
    features_dir = Path(features_dir)
    if not features_dir.is_dir():
        raise OSError(f"feature directory not found: {features_dir}")
    videos = []
    for vid in sorted(annos):
        feats = read_features(features_dir / f"{vid}{FEATURE_SUFFIX}")
        videos.append(Video(vid, feats, annos[vid]))
    return videos


# -- synthetic data ---------------------------------------------------------
@dataclass
class SynthConfig:
    videos: int = 100
    frames: int = 100  # T
    channels: int = 32  # C
    min_segments: int = 2
    max_segments: int = 6
    noise_sigma: float = 0.1
    rater_count: int = 5
    rater_jitter: int = 1
    min_segment_length: int = 5
    min_mean_distance: float = 1.0
    seed: int = 0
    id_prefix: str = "video"

    def __post_init__(self):
        if not 2 <= self.min_segments <= self.max_segments:
            raise ConfigError(f"need 2 <= min_segments <= max_segments, got {self.min_segments}..{self.max_segments}")
        if self.frames < self.min_segment_length * self.max_segments:
            raise ConfigError(
                f"T={self.frames} cannot hold {self.max_segments} segments of >= {self.min_segment_length} frames"
            )
        if self.videos < 0 or self.channels < 1 or self.rater_count < 1 or self.rater_jitter < 0:
            raise ConfigError("videos >= 0, channels >= 1, rater_count >= 1, rater_jitter >= 0 required")


def _segment_means(rng: np.random.Generator, m: int, c: int, min_dist: float) -> np.ndarray:
    means: list[np.ndarray] = []
    for _ in range(m):
        for _attempt in range(10_000):
            v = rng.standard_normal(c)
            v /= np.linalg.norm(v)
            if all(np.linalg.norm(v - u) >= min_dist for u in means):
                means.append(v)
                break
        else:
            raise ConfigError(f"could not place {m} unit means {min_dist} apart in {c} dims")
    return np.stack(means)


def _composition(rng: np.random.Generator, total: int, parts: int, minimum: int) -> np.ndarray:
    """Uniformly random composition of ``total`` into ``parts`` parts >= ``minimum``."""
    extra = total - minimum * parts
    bars = np.sort(rng.choice(extra + parts - 1, size=parts - 1, replace=False))
    edges = np.concatenate([[-1], bars, [extra + parts - 1]])
    return np.diff(edges) - 1 + minimum


def synth_video(rng: np.random.Generator, cfg: SynthConfig, video_id: str) -> Video:
    t, c = cfg.frames, cfg.channels
    m = int(rng.integers(cfg.min_segments, cfg.max_segments + 1))
    means = _segment_means(rng, m, c, cfg.min_mean_distance)
    lengths = _composition(rng, t, m, cfg.min_segment_length)
    seg_of_frame = np.repeat(np.arange(m), lengths)
    frames = means[seg_of_frame] + cfg.noise_sigma * rng.standard_normal((t, c))
    truth = np.cumsum(lengths)[:-1]
    raters = []
    for _ in range(cfg.rater_count):
        jitter = rng.integers(-cfg.rater_jitter, cfg.rater_jitter + 1, size=len(truth))
        marks = np.clip(truth + jitter, 0, t - 1)
        raters.append(sorted({int(b) for b in marks}))
    return Video(video_id, frames.astype(np.float32), AnnotationSet(video_id, t, raters))


def generate(cfg: SynthConfig) -> list[Video]:
    """Piecewise-constant feature sequences with jittered multi-rater boundaries."""
    rng = np.random.default_rng(cfg.seed)
    return [synth_video(rng, cfg, f"{cfg.id_prefix}{i:05d}") for i in range(cfg.videos)]


# -- uniform frame sampling -------------------------------------------------
def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def sample_indices(length: int, target: int) -> np.ndarray:
    return _round_half_up(np.linspace(0, length - 1, target))


def sample_uniform(features: np.ndarray, anno: AnnotationSet | None = None, target: int = 100):
    """Pick ``target`` evenly spaced frames; rescale boundaries to the new frame grid.

    Boundaries are scaled by target/T and rounded to the nearest slot, so the
    boundary count is preserved.
    """
    t = features.shape[0]
    if t < 1:
        raise ConfigError("cannot sample an empty sequence")
    if t == target:
        return features, anno
    sampled = features[sample_indices(t, target)]
    if anno is None:
        return sampled, None
    scale = target / t
    raters = [
        [int(v) for v in np.minimum(_round_half_up(np.asarray(r, dtype=np.float64) * scale), target - 1)]
        for r in anno.raters
    ]
    length = target if anno.instance_length == t else anno.instance_length * scale
    return sampled, AnnotationSet(anno.video_id, length, raters)
