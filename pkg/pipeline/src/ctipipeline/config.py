"""Pipeline configuration and the fingerprint chain.

Every artifact the pipeline writes (normalized corpus, embeddings, model,
attention exports) carries the configuration fingerprint in an
``<artifact>.fingerprint.json`` sidecar; downstream index builds refuse to mix
artifacts from different configurations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

DEFAULT_PLACEHOLDERS = {
    "url": "<url>",
    "ip": "<ip>",
    "hash": "<hash>",
    "cve": "<cve>",
    "registry": "<registry>",
    "file": "<file>",
}


@dataclass(frozen=True)
class PipelineConfig:
    """Reference configuration: 8x512 attention layers with 0.1 dropout,
    20% masking for 2 epochs, 30K BPE tokens, 100-dim embeddings for 100
    epochs."""

    layers: int = 8
    hidden: int = 512
    heads: int = 8
    dropout: float = 0.1
    mask_prob: float = 0.20
    epochs_mlm: int = 2
    bpe_vocab: int = 30_000
    max_len: int = 128
    lr_mlm: float = 5e-4
    batch_size: int = 16

    emb_dim: int = 100
    epochs_emb: int = 100
    window: int = 5
    negatives: int = 5
    min_word_freq: int = 3
    lr_emb: float = 0.025

    lemmatize: bool = True
    lowercase: bool = True
    head_agg: str = "mean"  # mean | max over attention heads
    subtoken_agg: str = "mean"  # mean | max over a word's subtoken block
    export_layer: int = -1  # last layer by default
    placeholders: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_PLACEHOLDERS))
    seed: int = 1

    def __post_init__(self):
        for name in ("layers", "hidden", "heads", "epochs_mlm", "bpe_vocab", "max_len",
                     "emb_dim", "epochs_emb", "window", "negatives", "min_word_freq",
                     "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.mask_prob < 1.0:
            raise ValueError("mask_prob must lie in (0, 1)")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")
        if self.head_agg not in ("mean", "max") or self.subtoken_agg not in ("mean", "max"):
            raise ValueError("head_agg and subtoken_agg must be 'mean' or 'max'")

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise ValueError(f"config {path} must hold a JSON object")
        return cls(**obj)

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(asdict(self), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )


def write_sidecar(artifact: str | Path, config: PipelineConfig) -> None:
    side = Path(str(artifact) + ".fingerprint.json")
    side.write_text(
        json.dumps({"config_fingerprint": config.fingerprint()}, indent=2) + "\n",
        encoding="utf-8",
    )


def read_sidecar(artifact: str | Path) -> str | None:
    side = Path(str(artifact) + ".fingerprint.json")
    if not side.exists():
        return None
    obj = json.loads(side.read_text(encoding="utf-8"))
    value = obj.get("config_fingerprint")
    if not isinstance(value, str):
        raise ValueError(f"{side}: missing 'config_fingerprint'")
    return value
