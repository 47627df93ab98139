"""Seeded synthetic corpora for benchmarks and scale tests.

Vocabulary vectors are standard gaussians (cosine similarities concentrate
near 0 with spread ~1/sqrt(dimension), so the dimension controls how many
synonym pairs exist under ``tau``); attention entries are Beta-distributed
with mass near zero so thresholded graphs stay sparse.
"""

from __future__ import annotations

import numpy as np

from .interchange import AttentionRecord, DocMeta, EmbeddingTable

__all__ = ["synthetic_embeddings", "synthetic_records", "synthetic_meta"]


def synthetic_embeddings(
    vocab_size: int, dimension: int = 128, seed: int = 0, prefix: str = "w"
) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(vocab_size, dimension))
    return EmbeddingTable({f"{prefix}{k}": vectors[k].tolist() for k in range(vocab_size)})


def synthetic_records(
    emb: EmbeddingTable,
    n_sentences: int,
    seed: int = 0,
    sentences_per_doc: int = 10,
    words_range: tuple[int, int] = (6, 12),
    attention_beta: tuple[float, float] = (0.35, 2.0),
) -> list[AttentionRecord]:
    rng = np.random.default_rng(seed)
    lo, hi = words_range
    records: list[AttentionRecord] = []
    for k in range(n_sentences):
        doc_id = f"doc{k // sentences_per_doc:05d}"
        sent_id = k % sentences_per_doc
        n = int(rng.integers(lo, hi + 1))
        n = min(n, len(emb.words))
        rows = rng.choice(len(emb.words), size=n, replace=False)
        words = tuple(emb.words[int(r)] for r in rows)
        att = np.zeros((n, n))
        upper = np.triu_indices(n, k=1)
        att[upper] = rng.beta(*attention_beta, size=len(upper[0]))
        att = att + att.T
        records.append(
            AttentionRecord(doc_id=doc_id, sent_id=sent_id, words=words, attention=att)
        )
    return records


def synthetic_meta(
    records: list[AttentionRecord], actors: list[str], seed: int = 0
) -> dict[str, DocMeta]:
    """Assign actors to documents round-robin after a seeded shuffle."""
    rng = np.random.default_rng(seed)
    docs = sorted({rec.doc_id for rec in records})
    order = rng.permutation(len(docs))
    out: dict[str, DocMeta] = {}
    for pos, idx in enumerate(order.tolist()):
        doc = docs[idx]
        out[doc] = DocMeta(doc_id=doc, actor=actors[pos % len(actors)] if actors else None)
    return out
