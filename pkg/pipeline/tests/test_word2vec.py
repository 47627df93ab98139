"""Skip-gram embedding training: shapes, invariants, co-occurrence signal."""

from __future__ import annotations

import numpy as np
import pytest

from ctipipeline import PipelineConfig, Sentence, train_word_embeddings, write_embeddings_tsv
from ctipipeline.config import read_sidecar

from conftest import toy_sentences


def cosine(a, b):
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def test_vocabulary_respects_frequency_cutoff(tiny_config):
    sentences = [
        Sentence("d", 0, ("alpha", "beta", "alpha")),
        Sentence("d", 1, ("alpha", "beta", "gamma")),
        Sentence("d", 2, ("alpha", "beta", "rare")),
    ]
    cfg = PipelineConfig(
        emb_dim=8, epochs_emb=2, min_word_freq=3, window=2, negatives=2, seed=1
    )
    vocab, matrix = train_word_embeddings(sentences, cfg)
    assert set(vocab) == {"alpha", "beta"}  # gamma and rare fall below the cutoff
    assert matrix.shape == (2, 8)


def test_no_zero_vectors_and_tsv_round_trip(tmp_path, tiny_config):
    sentences = toy_sentences(120, seed=3)
    vocab, matrix = train_word_embeddings(sentences, tiny_config)
    assert not (~matrix.any(axis=1)).any()
    out = tmp_path / "emb.tsv"
    write_embeddings_tsv(vocab, matrix, out, tiny_config)
    lines = out.read_text().strip().splitlines()
    assert len(lines) == len(vocab)
    word, vec = lines[0].split("\t")
    assert word == vocab[0]
    assert len(vec.split()) == tiny_config.emb_dim
    assert read_sidecar(out) == tiny_config.fingerprint()


def test_empty_corpus_rejected(tiny_config):
    with pytest.raises(ValueError):
        train_word_embeddings([], tiny_config)


def test_cutoff_leaving_nothing_rejected():
    cfg = PipelineConfig(emb_dim=8, epochs_emb=1, min_word_freq=99, seed=1)
    with pytest.raises(ValueError):
        train_word_embeddings([Sentence("d", 0, ("a", "b"))], cfg)


def test_planted_cooccurrence_is_close(tiny_config):
    sentences = toy_sentences(1000, seed=5)
    vocab, matrix = train_word_embeddings(sentences, tiny_config)
    row = {w: i for i, w in enumerate(vocab)}
    planted = cosine(matrix[row["ip"]], matrix[row["network"]])
    rng = np.random.default_rng(0)
    random_cosines = []
    for _ in range(500):
        a, b = rng.choice(len(vocab), size=2, replace=False)
        random_cosines.append(cosine(matrix[a], matrix[b]))
    assert planted > np.quantile(random_cosines, 0.95)


def test_training_is_deterministic(tiny_config):
    sentences = toy_sentences(100, seed=9)
    v1, m1 = train_word_embeddings(sentences, tiny_config)
    v2, m2 = train_word_embeddings(sentences, tiny_config)
    assert v1 == v2
    assert np.array_equal(m1, m2)
