"""Build attention graphs from attention records.

A sentence becomes an undirected graph: nodes are its content words (stopwords,
punctuation and out-of-vocabulary words are dropped), and an edge joins two
words whenever their attention, symmetrized by max of the two directions,
exceeds the construction threshold.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .interchange import AttentionRecord, EmbeddingTable

__all__ = [
    "Node",
    "AttentionGraph",
    "GraphParams",
    "default_stopwords",
    "preprocess_words",
    "build_graph",
    "build_fully_connected",
]

logger = logging.getLogger(__name__)

# IoC placeholders emitted by the normalization step; kept verbatim.
IOC_PLACEHOLDERS = frozenset({"<ip>", "<hash>", "<url>", "<cve>", "<registry>", "<file>"})

_PUNCTUATION = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~…–—‘’“”")


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The English stopword list shipped with the package."""
    text = resources.files("ctisearch").joinpath("data/stopwords.txt").read_text("utf-8")
    return frozenset(w for w in text.split() if w)


@dataclass(frozen=True)
class Node:
    """A kept word occurrence; ``index`` is its position in the original sentence."""

    index: int
    word: str


@dataclass
class AttentionGraph:
    """Undirected graph over a sentence's content words.

    Edges are stored canonically as ``(i, j)`` with ``i < j``; node indices are
    positions in the original sentence, so they survive filtering.
    """

    doc_id: str
    sent_id: int
    nodes: list[Node]
    edges: set[tuple[int, int]]
    edge_weight: dict[tuple[int, int], float]
    oov_count: int = 0

    _adjacency: dict[int, set[int]] | None = field(default=None, repr=False, compare=False)
    _canon_key: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sent_id)

    def words(self) -> list[str]:
        return [n.word for n in self.nodes]

    def adjacency(self) -> dict[int, set[int]]:
        if self._adjacency is None:
            adj: dict[int, set[int]] = {n.index: set() for n in self.nodes}
            for i, j in self.edges:
                adj[i].add(j)
                adj[j].add(i)
            self._adjacency = adj
        return self._adjacency

    def canon_key(self) -> tuple:
        """Orientation key used by the matcher to process graph pairs in a
        direction-independent order."""
        if self._canon_key is None:
            self._canon_key = (
                len(self.nodes),
                len(self.edges),
                tuple(sorted(n.word for n in self.nodes)),
                tuple(sorted(self.edges)),
            )
        return self._canon_key


@dataclass(frozen=True)
class GraphParams:
    """Graph construction parameters; the defaults reproduce the reference
    configuration (edge threshold 0.15)."""

    attention_threshold: float = 0.15
    stopword_list: frozenset[str] = field(default_factory=default_stopwords)
    keep_isolated_nodes: bool = True
    max_nodes: int = 128  # warn (not fail) above this

    def __post_init__(self):
        if not 0.0 < self.attention_threshold < 1.0:
            raise ValueError("attention_threshold must lie strictly between 0 and 1")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be positive")


def _is_punctuation(word: str) -> bool:
    return all(ch in _PUNCTUATION for ch in word)


def preprocess_words(words: list[str] | tuple[str, ...], params: GraphParams) -> list[tuple[int, str]]:
    """Return the surviving ``(index, lemma)`` pairs of a word sequence.

    Drops stopwords, pure punctuation and empty strings.  IoC placeholder
    tokens (``<ip>``, ``<hash>``, ...) are kept verbatim.  Words arrive
    lemmatized and lowercased from the pipeline, so the lemma is the word
    itself.
    """
    kept: list[tuple[int, str]] = []
    for index, word in enumerate(words):
        if not word:
            continue
        if word in IOC_PLACEHOLDERS:
            kept.append((index, word))
            continue
        if word in params.stopword_list:
            continue
        if _is_punctuation(word):
            continue
        kept.append((index, word))
    return kept


def _select_nodes(
    rec: AttentionRecord, emb: EmbeddingTable, params: GraphParams
) -> tuple[list[Node], int]:
    nodes: list[Node] = []
    oov = 0
    for index, lemma in preprocess_words(rec.words, params):
        if lemma in emb:
            nodes.append(Node(index=index, word=lemma))
        else:
            oov += 1
    if len(nodes) > params.max_nodes:
        logger.warning(
            "sentence %s/%s keeps %d nodes (cap %d)",
            rec.doc_id,
            rec.sent_id,
            len(nodes),
            params.max_nodes,
        )
    return nodes, oov


def build_graph(rec: AttentionRecord, emb: EmbeddingTable, params: GraphParams) -> AttentionGraph:
    """Threshold the attention matrix into an undirected graph.

    For kept positions ``i < j`` the edge weight is
    ``max(attention[i][j], attention[j][i])``; the edge exists iff the weight
    strictly exceeds ``params.attention_threshold``.
    """
    nodes, oov = _select_nodes(rec, emb, params)
    att = rec.attention
    edges: set[tuple[int, int]] = set()
    edge_weight: dict[tuple[int, int], float] = {}
    indices = [n.index for n in nodes]
    if len(indices) >= 2:
        idx = np.asarray(indices)
        sym = np.maximum(att, att.T)[np.ix_(idx, idx)]
        above = np.triu(sym > params.attention_threshold, k=1)
        for a, b in zip(*np.nonzero(above)):
            i, j = int(idx[a]), int(idx[b])
            edges.add((i, j))
            edge_weight[(i, j)] = float(sym[a, b])
    if not params.keep_isolated_nodes:
        connected = {i for e in edges for i in e}
        nodes = [n for n in nodes if n.index in connected]
    return AttentionGraph(
        doc_id=rec.doc_id,
        sent_id=rec.sent_id,
        nodes=nodes,
        edges=edges,
        edge_weight=edge_weight,
        oov_count=oov,
    )


def build_fully_connected(
    rec: AttentionRecord, emb: EmbeddingTable, params: GraphParams
) -> AttentionGraph:
    """Ablation builder: same node selection, every node pair an edge of weight 1."""
    nodes, oov = _select_nodes(rec, emb, params)
    edges: set[tuple[int, int]] = set()
    edge_weight: dict[tuple[int, int], float] = {}
    indices = [n.index for n in nodes]
    for a, i in enumerate(indices):
        for j in indices[a + 1 :]:
            edges.add((i, j))
            edge_weight[(i, j)] = 1.0
    if not params.keep_isolated_nodes and len(nodes) == 1:
        nodes = []
    return AttentionGraph(
        doc_id=rec.doc_id,
        sent_id=rec.sent_id,
        nodes=nodes,
        edges=edges,
        edge_weight=edge_weight,
        oov_count=oov,
    )
