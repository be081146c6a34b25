"""End-to-end boundary model: SPoS windows -> encoder -> group similarity -> head."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spos
from .encoder import EncoderConfig, TemporalEncoder
from .head import HeadConfig, ScoreSequence, Scorer, SimilarityFCN
from .numerics import ContractError, Linear, Module, Parameter, Tensor, checkpoint, concat, get_dtype, tensor
from .similarity import canonical_metric, group_similarity


@dataclass
class ModelConfig:
    window: int = 8  # K
    channels: int = 256  # C
    groups: int = 4  # G
    similarity: str = "cosine"
    feature_dim: int | None = None  # input features; projected to C when different
    right_edge: str = "padded"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        if isinstance(self.head, dict):
            self.head = HeadConfig(**self.head)
        self.similarity = canonical_metric(self.similarity)
        if self.window < 1:
            raise ContractError(f"window K must be >= 1, got {self.window}")
        if self.channels % self.groups:
            raise ContractError(f"channels {self.channels} not divisible by groups {self.groups}")
        if self.encoder.model_dim != self.channels:
            self.encoder = dataclasses.replace(self.encoder, model_dim=self.channels)
        self.head = self.head.resolve(self.channels)

    @property
    def window_length(self) -> int:
        return 2 * self.window + 1

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


class BoundaryModel(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.project = None
        if cfg.feature_dim is not None and cfg.feature_dim != cfg.channels:
            self.project = Linear(rng, cfg.feature_dim, cfg.channels)
        self.encoder = TemporalEncoder(cfg.encoder, cfg.window_length, rng)
        self.fcn = SimilarityFCN(cfg.head, cfg.groups, rng)
        self.scorer = Scorer(cfg.head, cfg.channels, rng)
        self.assign_names()

    def windows(self, features) -> Tensor:
        """Real-frame context windows (T, L, C) of one video."""
        x = tensor(features)
        if self.project is not None:
            x = self.project(x)
        return spos.windows(x, self.cfg.window, self.cfg.right_edge)

    def frame_embeddings(self, videos) -> list[Tensor]:
        """Pooled similarity-map vectors h_t, one (T_i, C) tensor per video.

        Windows of every video are batched through encoder, similarity and FCN
        together.  Windows of padded frames are never scored, so they are
        dropped right after partitioning.
        """
        wins = [self.windows(v) for v in videos]
        lengths = [w.shape[0] for w in wins]
        batch = concat(wins, axis=0) if len(wins) > 1 else wins[0]
        encoded = self.encoder(batch)
        maps = group_similarity(encoded, self.cfg.groups, self.cfg.similarity)
        h = self.fcn(maps)
        out, start = [], 0
        for n in lengths:
            out.append(h[start : start + n])
            start += n
        return out

    def forward(self, videos) -> list[ScoreSequence]:
        return [self.scorer(h) for h in self.frame_embeddings(videos)]

    def logits(self, videos) -> list[Tensor]:
        return [self.scorer.logits(h) for h in self.frame_embeddings(videos)]

    # -- persistence -------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state(self, values: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(values))
        extra = sorted(set(values) - set(params))
        if missing or extra:
            raise ContractError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if values[name].shape != p.shape:
                raise ContractError(f"{name}: checkpoint shape {values[name].shape} != {p.shape}")
            p.data = values[name].astype(get_dtype())
            p.zero_grad()

    def save(self, path) -> None:
        path = Path(path)
        checkpoint.save(path, self.state())
        config_path(path).write_text(self.cfg.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "BoundaryModel":
        path = Path(path)
        try:
            cfg = ModelConfig.from_json(config_path(path).read_text())
        except OSError as exc:
            raise OSError(f"cannot read model config {config_path(path)}: {exc.strerror}") from exc
        model = cls(cfg)
        model.load_state(checkpoint.load(path))
        return model


def config_path(ckpt_path: Path) -> Path:
    ckpt_path = Path(ckpt_path)
    return ckpt_path.with_name(ckpt_path.name + ".json")
