"""Shared builders for tests: hand-made embeddings, graphs and records."""

from __future__ import annotations

import numpy as np
import pytest

from ctisearch import (
    AttentionGraph,
    AttentionRecord,
    DocMeta,
    EmbeddingTable,
    GraphParams,
    MatchParams,
    Node,
    write_attention_file,
    write_doc_meta,
    write_embeddings,
)


def make_table(entries: dict[str, list[float]]) -> EmbeddingTable:
    return EmbeddingTable(entries)


def graph_of(
    words,
    edges=(),
    doc_id: str = "g",
    sent_id: int = 0,
    indices=None,
    weights=None,
) -> AttentionGraph:
    """Build a graph directly from a word list and (i, j) edge pairs."""
    if indices is None:
        indices = list(range(len(words)))
    nodes = [Node(index=i, word=w) for i, w in zip(indices, words)]
    canon = {tuple(sorted(e)) for e in edges}
    weight = {e: (weights or {}).get(e, 1.0) for e in canon}
    return AttentionGraph(
        doc_id=doc_id, sent_id=sent_id, nodes=nodes, edges=canon, edge_weight=weight
    )


def record_of(words, attention, doc_id: str = "d", sent_id: int = 0) -> AttentionRecord:
    return AttentionRecord(
        doc_id=doc_id,
        sent_id=sent_id,
        words=tuple(words),
        attention=np.asarray(attention, dtype=np.float64),
    )


def separated_table(words, dimension: int | None = None) -> EmbeddingTable:
    """One orthogonal axis per word: every cross-word distance is exactly 0.5,
    so with tau < 0.5 only identical words match."""
    n = len(words)
    dim = dimension or n
    assert dim >= n
    entries = {}
    for k, w in enumerate(words):
        v = [0.0] * dim
        v[k] = 1.0
        entries[w] = v
    return EmbeddingTable(entries)


@pytest.fixture
def default_match_params() -> MatchParams:
    return MatchParams()


@pytest.fixture
def default_graph_params() -> GraphParams:
    return GraphParams()


# ---------------------------------------------------------------------------
# seeded random generators used by the oracle and invariants suites


def random_embeddings(rng: np.random.Generator, vocab_size: int, dimension: int, prefix="w"):
    vectors = rng.normal(size=(vocab_size, dimension))
    return EmbeddingTable({f"{prefix}{k}": vectors[k].tolist() for k in range(vocab_size)})


def random_graph(
    rng: np.random.Generator,
    emb: EmbeddingTable,
    max_nodes: int = 8,
    edge_prob: float = 0.4,
    doc_id: str = "r",
    sent_id: int = 0,
) -> AttentionGraph:
    n = int(rng.integers(1, max_nodes + 1))
    words = [emb.words[int(k)] for k in rng.integers(0, len(emb.words), size=n)]
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                edges.add((i, j))
    return graph_of(words, edges, doc_id=doc_id, sent_id=sent_id)


# ---------------------------------------------------------------------------
# an on-disk demo corpus shared by CLI / service tests


@pytest.fixture(scope="session")
def demo_paths(tmp_path_factory):
    """Small labeled corpus on disk plus a built index directory."""
    from ctisearch import MatchParams, build_index, save_index

    root = tmp_path_factory.mktemp("demo")
    chain = np.zeros((3, 3))
    chain[0, 1] = chain[1, 0] = chain[1, 2] = chain[2, 1] = 0.3
    emb = separated_table(
        ["dropper", "payload", "encrypted", "process", "list", "running", "filler"]
    )
    records = [
        record_of(["dropper", "payload", "encrypted"], chain, doc_id="lazarus-1", sent_id=0),
        record_of(["process", "list", "running"], chain, doc_id="lazarus-1", sent_id=1),
        record_of(["dropper", "payload", "encrypted"], chain, doc_id="lazarus-2", sent_id=0),
        record_of(["filler", "process", "payload"], np.zeros((3, 3)), doc_id="turla-1", sent_id=0),
        record_of(["filler"], [[0.0]], doc_id="turla-2", sent_id=0),
    ]
    metas = [
        DocMeta(doc_id="lazarus-1", actor="Lazarus"),
        DocMeta(doc_id="lazarus-2", actor="Lazarus"),
        DocMeta(doc_id="turla-1", actor="Turla"),
        DocMeta(doc_id="turla-2", actor="Turla"),
    ]
    paths = {
        "attentions": root / "attentions.jsonl",
        "embeddings": root / "embeddings.tsv",
        "meta": root / "meta.jsonl",
        "index": root / "index",
        "query": root / "query.jsonl",
        "behaviors": root / "behaviors.jsonl",
    }
    write_attention_file(records, paths["attentions"])
    write_embeddings(emb, paths["embeddings"])
    write_doc_meta(metas, paths["meta"])
    write_attention_file(
        [record_of(["dropper", "payload", "encrypted"], chain, doc_id="q", sent_id=0)],
        paths["query"],
    )
    write_attention_file(
        [
            record_of(["dropper", "payload", "encrypted"], chain, doc_id="q", sent_id=0),
            record_of(["process", "list", "running"], chain, doc_id="q", sent_id=1),
        ],
        paths["behaviors"],
    )
    meta_map = {m.doc_id: m for m in metas}
    index = build_index(records, emb, GraphParams(), MatchParams(), meta=meta_map)
    save_index(index, paths["index"])
    return paths
