"""Skip-gram word2vec with negative sampling, vectorized in numpy.

Trains domain word embeddings on the normalized corpus; only input vectors
are kept.  Output is the embedding TSV (``word<TAB>v1 v2 ... vd``) consumed
by the search core.
"""

from __future__ import annotations

import logging
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import PipelineConfig, write_sidecar
from .normalize import Sentence

logger = logging.getLogger(__name__)

__all__ = ["train_word_embeddings", "write_embeddings_tsv"]

_BATCH = 256
# batched updates accumulate over duplicate indices; capping the per-batch
# step keeps small-vocabulary corpora from diverging
_MAX_STEP = 0.2


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def _build_pairs(
    token_lists: Sequence[Sequence[int]], window: int, rng: np.random.Generator
) -> np.ndarray:
    pairs: list[tuple[int, int]] = []
    for tokens in token_lists:
        n = len(tokens)
        for center in range(n):
            span = int(rng.integers(1, window + 1))  # dynamic window, word2vec-style
            for ctx in range(max(0, center - span), min(n, center + span + 1)):
                if ctx != center:
                    pairs.append((tokens[center], tokens[ctx]))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.asarray(pairs, dtype=np.int64)


def train_word_embeddings(
    sentences: Iterable[Sentence], config: PipelineConfig
) -> tuple[list[str], np.ndarray]:
    """Returns (vocabulary, matrix); one row per word above the frequency cutoff."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("empty corpus")
    counts = Counter(w for s in sentences for w in s.words)
    vocab = [w for w, c in counts.most_common() if c >= config.min_word_freq]
    if not vocab:
        raise ValueError(
            f"no word reaches the frequency cutoff {config.min_word_freq}"
        )
    word_to_id = {w: i for i, w in enumerate(vocab)}
    token_lists = [
        [word_to_id[w] for w in s.words if w in word_to_id] for s in sentences
    ]
    token_lists = [t for t in token_lists if len(t) >= 2]

    rng = np.random.default_rng(config.seed)
    vocab_size = len(vocab)
    dim = config.emb_dim
    W = (rng.random((vocab_size, dim)) - 0.5) / dim  # input vectors
    C = np.zeros((vocab_size, dim))  # context vectors

    freqs = np.asarray([counts[w] for w in vocab], dtype=np.float64)
    noise = freqs**0.75
    noise /= noise.sum()

    pairs = _build_pairs(token_lists, config.window, rng)
    if len(pairs) == 0:
        raise ValueError("corpus yields no training pairs")
    logger.info("word2vec: %d words, %d pairs, %d epochs", vocab_size, len(pairs), config.epochs_emb)

    k = config.negatives
    for epoch in range(config.epochs_emb):
        lr = config.lr_emb * max(1.0 - epoch / config.epochs_emb, 0.05)
        order = rng.permutation(len(pairs))
        for start in range(0, len(order), _BATCH):
            batch = pairs[order[start : start + _BATCH]]
            centers = batch[:, 0]
            contexts = batch[:, 1]
            negs = rng.choice(vocab_size, size=(len(batch), k), p=noise)
            w = W[centers]
            c_pos = C[contexts]
            c_neg = C[negs]
            g_pos = _sigmoid((w * c_pos).sum(axis=1)) - 1.0  # (B,)
            g_neg = _sigmoid(np.einsum("bd,bkd->bk", w, c_neg))  # (B,k)
            grad_w = g_pos[:, None] * c_pos + np.einsum("bk,bkd->bd", g_neg, c_neg)
            step = _MAX_STEP
            np.add.at(W, centers, np.clip(-lr * grad_w, -step, step))
            np.add.at(C, contexts, np.clip(-lr * (g_pos[:, None] * w), -step, step))
            np.add.at(
                C,
                negs.reshape(-1),
                np.clip(-lr * (g_neg[:, :, None] * w[:, None, :]), -step, step).reshape(-1, dim),
            )
    # the interchange format forbids zero vectors; random init + updates never
    # produce one, but guard anyway
    zero_rows = np.nonzero(~W.any(axis=1))[0]
    for row in zero_rows.tolist():
        W[row, row % dim] = 1e-8
    return vocab, W


def write_embeddings_tsv(
    vocab: Sequence[str], matrix: np.ndarray, path: str | Path, config: PipelineConfig
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, row in zip(vocab, matrix):
            fh.write(word + "\t" + " ".join(repr(float(v)) for v in row) + "\n")
    write_sidecar(path, config)
