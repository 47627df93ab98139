"""Word-level attention export.

Each sentence is run through the trained model; the configured layer's
attention (last by default) is aggregated over heads, then over each word's
subtoken block in both rows and columns, yielding a square word-level matrix
aligned with the sentence's words.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch

from .config import PipelineConfig, write_sidecar
from .mlm import load_artifact
from .normalize import Sentence

logger = logging.getLogger(__name__)

__all__ = ["ExportStats", "export_attentions", "sentence_attention"]


@dataclass
class ExportStats:
    sentences: int = 0
    truncated: int = 0


def _aggregate(block: np.ndarray, how: str) -> float:
    return float(block.max()) if how == "max" else float(block.mean())


def _word_spans(
    words: Sequence[str], tokenizer, max_len: int
) -> tuple[list[str], list[tuple[int, int]], list[int]]:
    """Token ids per word, concatenated, truncated to the model context.

    Returns (kept words, [start, end) spans offset for the leading [CLS],
    token ids including [CLS]/[SEP]).
    """
    cls_id = tokenizer.token_to_id("[CLS]")
    sep_id = tokenizer.token_to_id("[SEP]")
    unk_id = tokenizer.token_to_id("[UNK]")
    kept: list[str] = []
    spans: list[tuple[int, int]] = []
    ids: list[int] = [cls_id]
    budget = max_len - 2
    for word in words:
        token_ids = tokenizer.encode(word, add_special_tokens=False).ids or [unk_id]
        if len(ids) - 1 + len(token_ids) > budget:
            break
        spans.append((len(ids), len(ids) + len(token_ids)))
        ids.extend(token_ids)
        kept.append(word)
    ids.append(sep_id)
    return kept, spans, ids


def sentence_attention(
    words: Sequence[str], model, tokenizer, config: PipelineConfig
) -> tuple[list[str], np.ndarray]:
    """(kept words, word-level attention matrix) for one sentence."""
    kept, spans, ids = _word_spans(words, tokenizer, config.max_len)
    if not kept:
        return [], np.zeros((0, 0))
    with torch.no_grad():
        out = model(
            input_ids=torch.tensor([ids], dtype=torch.long), output_attentions=True
        )
    layer = out.attentions[config.export_layer][0]  # (heads, T, T)
    att = layer.numpy().astype(np.float64)
    att = att.max(axis=0) if config.head_agg == "max" else att.mean(axis=0)
    n = len(kept)
    matrix = np.zeros((n, n))
    for i, (r0, r1) in enumerate(spans):
        for j, (c0, c1) in enumerate(spans):
            matrix[i, j] = _aggregate(att[r0:r1, c0:c1], config.subtoken_agg)
    return kept, np.clip(matrix, 0.0, 1.0)


def export_attentions(
    artifact_dir: str | Path,
    sentences: Iterable[Sentence],
    out_path: str | Path,
    config: PipelineConfig,
) -> ExportStats:
    """Write word-level attention records (JSON lines) for every sentence."""
    model, tokenizer, _ = load_artifact(artifact_dir, expected_fingerprint=config.fingerprint())
    stats = ExportStats()
    with open(out_path, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            kept, matrix = sentence_attention(sentence.words, model, tokenizer, config)
            if len(kept) < len(sentence.words):
                stats.truncated += 1
                logger.warning(
                    "sentence %s/%s truncated from %d to %d words",
                    sentence.doc_id,
                    sentence.sent_id,
                    len(sentence.words),
                    len(kept),
                )
            if not kept:
                continue
            fh.write(
                json.dumps(
                    {
                        "doc_id": sentence.doc_id,
                        "sent_id": sentence.sent_id,
                        "words": kept,
                        "attention": [[float(v) for v in row] for row in matrix],
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            stats.sentences += 1
    write_sidecar(out_path, config)
    return stats
