"""Corpus index: cached graphs, word synonym clusters, metadata, fingerprint.

The index makes query time independent of graph construction (graphs are
prebuilt and persisted) and prunes candidates through a complete word ->
sentences synonym map: a sentence can only match a query if it contains at
least one word within ``tau`` of a query word, so scanning the union of the
query words' clusters loses nothing.

On disk an index is a directory of four files (``graphs.jsonl``,
``clusters.jsonl``, ``meta.jsonl``, ``fingerprint.json``) written
deterministically: identical inputs produce byte-identical directories.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import EmptyAttributionError, MalformedLineError, StaleIndexError, StructuralError
from .graphs import AttentionGraph, GraphParams, Node, build_graph
from .interchange import (
    AttentionRecord,
    DocMeta,
    EmbeddingTable,
    read_doc_meta,
    write_doc_meta,
)
from .matching import (
    MatchParams,
    MatchSet,
    QueryMatcher,
    SynonymResolver,
    word_distance,
)

__all__ = [
    "SentenceKey",
    "BuildStats",
    "Fingerprint",
    "CorpusIndex",
    "SearchHit",
    "build_index",
    "save_index",
    "load_index",
    "candidates",
    "search",
    "search_unoptimized",
    "attribute",
    "verify_index",
    "compute_fingerprint",
]

logger = logging.getLogger(__name__)

SentenceKey = tuple[str, int]

_PREFILTER_EPS = 1e-9


@dataclass(frozen=True)
class BuildStats:
    sentences: int = 0
    documents: int = 0
    oov_words: int = 0
    vocab_size: int = 0
    corpus_words: int = 0


@dataclass(frozen=True)
class Fingerprint:
    """Build-time parameters; queries with different parameters are rejected."""

    attention_threshold: float
    keep_isolated_nodes: bool
    max_nodes: int
    stopwords_sha256: str
    tau: float
    kappa: float
    distance_mode: str
    embeddings_sha256: str

    @property
    def digest(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _stopwords_digest(stopwords: frozenset[str]) -> str:
    joined = "\n".join(sorted(stopwords))
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def compute_fingerprint(
    graph_params: GraphParams, match_params: MatchParams, emb: EmbeddingTable
) -> Fingerprint:
    return Fingerprint(
        attention_threshold=graph_params.attention_threshold,
        keep_isolated_nodes=graph_params.keep_isolated_nodes,
        max_nodes=graph_params.max_nodes,
        stopwords_sha256=_stopwords_digest(graph_params.stopword_list),
        tau=match_params.tau,
        kappa=match_params.kappa,
        distance_mode=match_params.distance_mode,
        embeddings_sha256=emb.content_digest(),
    )


@dataclass
class CorpusIndex:
    graphs: dict[SentenceKey, AttentionGraph]
    clusters: dict[str, tuple[SentenceKey, ...]]  # only non-empty clusters stored
    meta: dict[str, DocMeta]
    fingerprint: Fingerprint
    stats: BuildStats

    def cluster_of(self, word: str) -> tuple[SentenceKey, ...]:
        return self.clusters.get(word, ())


@dataclass(frozen=True)
class SearchHit:
    doc_id: str
    sent_id: int
    score: float
    match_set: MatchSet

    @property
    def key(self) -> SentenceKey:
        return (self.doc_id, self.sent_id)


# ---------------------------------------------------------------------------
# building


def _build_clusters(
    emb: EmbeddingTable,
    match_params: MatchParams,
    postings: Mapping[str, set[SentenceKey]],
) -> dict[str, tuple[SentenceKey, ...]]:
    """word -> sentences containing a word within tau, for every vocabulary word.

    Vectorized with a loose prefilter, confirmed with the scalar distance, so
    cluster membership agrees exactly with `word_match`.  Words with empty
    clusters are omitted (missing key == empty cluster).
    """
    corpus_words = sorted(postings)
    if not corpus_words:
        return {}
    mode = match_params.distance_mode
    tau = match_params.tau
    if mode == "exact-word":
        return {w: tuple(sorted(postings[w])) for w in corpus_words}
    corpus_rows = np.asarray([emb.row(w) for w in corpus_words])
    clusters: dict[str, tuple[SentenceKey, ...]] = {}
    block = 1024
    if mode == "half-cosine":
        target = emb.unit_rows[corpus_rows]
        floor = (1.0 - 2.0 * tau) - _PREFILTER_EPS
        for start in range(0, len(emb.words), block):
            words = emb.words[start : start + block]
            sims = emb.unit_rows[start : start + block] @ target.T
            for local, word in enumerate(words):
                hit_cols = np.nonzero(sims[local] >= floor)[0]
                _collect(word, hit_cols, corpus_words, emb, mode, tau, postings, clusters)
    else:  # minmax-euclidean
        lo, span = emb.minmax_stats
        scaled = (emb.matrix - lo) / span
        target = scaled[corpus_rows]
        target_sq = (target**2).sum(axis=1)
        ceil = (tau + _PREFILTER_EPS) ** 2 * emb.dimension
        for start in range(0, len(emb.words), block):
            words = emb.words[start : start + block]
            rows = scaled[start : start + block]
            sq = (rows**2).sum(axis=1)
            d2 = sq[:, None] + target_sq[None, :] - 2.0 * (rows @ target.T)
            for local, word in enumerate(words):
                hit_cols = np.nonzero(d2[local] <= ceil)[0]
                _collect(word, hit_cols, corpus_words, emb, mode, tau, postings, clusters)
    return clusters


def _collect(word, hit_cols, corpus_words, emb, mode, tau, postings, clusters) -> None:
    acc: set[SentenceKey] = set()
    for col in hit_cols.tolist():
        other = corpus_words[col]
        if word_distance(word, other, emb, mode) < tau:
            acc |= postings[other]
    if acc:
        clusters[word] = tuple(sorted(acc))


def build_index(
    records: Iterable[AttentionRecord],
    emb: EmbeddingTable,
    graph_params: GraphParams,
    match_params: MatchParams,
    meta: Mapping[str, DocMeta] | None = None,
) -> CorpusIndex:
    """Build every graph once, compute synonym clusters over the whole
    vocabulary, and record the parameter fingerprint."""
    graphs: dict[SentenceKey, AttentionGraph] = {}
    postings: dict[str, set[SentenceKey]] = {}
    docs: set[str] = set()
    oov_total = 0
    for rec in records:
        g = build_graph(rec, emb, graph_params)
        graphs[g.key] = g
        docs.add(g.doc_id)
        if g.oov_count:
            logger.warning(
                "%s/%s: %d out-of-vocabulary words dropped", g.doc_id, g.sent_id, g.oov_count
            )
            oov_total += g.oov_count
        for node in g.nodes:
            postings.setdefault(node.word, set()).add(g.key)
    clusters = _build_clusters(emb, match_params, postings)
    stats = BuildStats(
        sentences=len(graphs),
        documents=len(docs),
        oov_words=oov_total,
        vocab_size=len(emb),
        corpus_words=len(postings),
    )
    return CorpusIndex(
        graphs=graphs,
        clusters=clusters,
        meta=dict(meta or {}),
        fingerprint=compute_fingerprint(graph_params, match_params, emb),
        stats=stats,
    )


# ---------------------------------------------------------------------------
# persistence


def _graph_to_obj(g: AttentionGraph) -> dict:
    return {
        "doc_id": g.doc_id,
        "sent_id": g.sent_id,
        "nodes": [[n.index, n.word] for n in sorted(g.nodes, key=lambda n: n.index)],
        "edges": [[i, j, float(g.edge_weight[(i, j)])] for i, j in sorted(g.edges)],
        "oov": g.oov_count,
    }


def _graph_from_obj(obj: dict, path: str, line_no: int) -> AttentionGraph:
    try:
        nodes = [Node(index=int(i), word=str(w)) for i, w in obj["nodes"]]
        edges = set()
        weights = {}
        for i, j, w in obj["edges"]:
            edge = (int(i), int(j))
            edges.add(edge)
            weights[edge] = float(w)
        return AttentionGraph(
            doc_id=obj["doc_id"],
            sent_id=int(obj["sent_id"]),
            nodes=nodes,
            edges=edges,
            edge_weight=weights,
            oov_count=int(obj.get("oov", 0)),
        )
    except (KeyError, TypeError, ValueError):
        raise StructuralError("malformed graph record", path=path, line=line_no) from None


def save_index(index: CorpusIndex, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "graphs.jsonl", "w", encoding="utf-8") as fh:
        for key in index.graphs:  # corpus order
            fh.write(json.dumps(_graph_to_obj(index.graphs[key]), separators=(",", ":")))
            fh.write("\n")
    with open(directory / "clusters.jsonl", "w", encoding="utf-8") as fh:
        for word in sorted(index.clusters):
            sents = [[d, s] for d, s in index.clusters[word]]
            fh.write(json.dumps({"word": word, "sents": sents}, separators=(",", ":")))
            fh.write("\n")
    write_doc_meta(
        (index.meta[doc] for doc in sorted(index.meta)), directory / "meta.jsonl"
    )
    payload = {
        "fingerprint": index.fingerprint.digest,
        "params": dict(index.fingerprint.__dict__),
        "build_stats": dict(index.stats.__dict__),
    }
    with open(directory / "fingerprint.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return directory


def load_index(directory: str | Path) -> CorpusIndex:
    directory = Path(directory)
    fp_path = directory / "fingerprint.json"
    try:
        payload = json.loads(fp_path.read_text(encoding="utf-8"))
        fingerprint = Fingerprint(**payload["params"])
        stats = BuildStats(**payload["build_stats"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MalformedLineError(f"unreadable fingerprint: {exc}", path=str(fp_path)) from None
    if payload.get("fingerprint") != fingerprint.digest:
        raise StaleIndexError(f"fingerprint digest mismatch in {fp_path}")
    graphs: dict[SentenceKey, AttentionGraph] = {}
    gp = directory / "graphs.jsonl"
    with open(gp, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            g = _graph_from_obj(json.loads(line), str(gp), line_no)
            graphs[g.key] = g
    clusters: dict[str, tuple[SentenceKey, ...]] = {}
    cp = directory / "clusters.jsonl"
    with open(cp, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            clusters[obj["word"]] = tuple((d, int(s)) for d, s in obj["sents"])
    meta = read_doc_meta(directory / "meta.jsonl")
    return CorpusIndex(
        graphs=graphs, clusters=clusters, meta=meta, fingerprint=fingerprint, stats=stats
    )


# ---------------------------------------------------------------------------
# querying


def verify_index(
    index: CorpusIndex,
    emb: EmbeddingTable,
    match_params: MatchParams,
    graph_params: GraphParams | None = None,
) -> None:
    """Raise `StaleIndexError` unless the given parameters match the build-time
    fingerprint."""
    fp = index.fingerprint
    if (
        fp.tau != match_params.tau
        or fp.kappa != match_params.kappa
        or fp.distance_mode != match_params.distance_mode
    ):
        raise StaleIndexError(
            f"index built with tau={fp.tau} kappa={fp.kappa} mode={fp.distance_mode}, "
            f"queried with tau={match_params.tau} kappa={match_params.kappa} "
            f"mode={match_params.distance_mode}"
        )
    if fp.embeddings_sha256 != emb.content_digest():
        raise StaleIndexError("index built against a different embedding table")
    if graph_params is not None:
        if (
            fp.attention_threshold != graph_params.attention_threshold
            or fp.keep_isolated_nodes != graph_params.keep_isolated_nodes
            or fp.stopwords_sha256 != _stopwords_digest(graph_params.stopword_list)
        ):
            raise StaleIndexError("graph construction parameters differ from index build")


def candidates(
    index: CorpusIndex,
    query_graph: AttentionGraph,
    match_params: MatchParams | None = None,
    emb: EmbeddingTable | None = None,
) -> set[SentenceKey]:
    """Union of the query words' synonym clusters.

    Pass ``match_params`` and ``emb`` to have the index fingerprint verified
    first (as `search` does).
    """
    if match_params is not None and emb is not None:
        verify_index(index, emb, match_params)
    out: set[SentenceKey] = set()
    for node in query_graph.nodes:
        out.update(index.cluster_of(node.word))
    return out


def _scan(
    graphs: Iterator[AttentionGraph],
    matcher: QueryMatcher,
    sim_threshold: float,
) -> list[SearchHit]:
    hits: list[SearchHit] = []
    for g in graphs:
        mset, score = matcher.best_against(g)
        if score > sim_threshold and score > 0.0:
            hits.append(SearchHit(doc_id=g.doc_id, sent_id=g.sent_id, score=score, match_set=mset))
    hits.sort(key=lambda h: (-h.score, h.doc_id, h.sent_id))
    return hits


def search(
    index: CorpusIndex,
    emb: EmbeddingTable,
    query_graph: AttentionGraph,
    match_params: MatchParams,
    sim_threshold: float,
    top_k: int | None = None,
    resolver: SynonymResolver | None = None,
    threads: int = 1,
) -> list[SearchHit]:
    """Ranked hits above ``sim_threshold``, scanning only cluster candidates.

    Ordering is total and deterministic: score descending, then
    ``(doc_id, sent_id)`` — also under thread fan-out, which partitions the
    candidates and merges through the same sort.
    """
    verify_index(index, emb, match_params)
    matcher = QueryMatcher(query_graph, emb, match_params, resolver=resolver)
    keys = sorted(candidates(index, query_graph))
    if threads > 1 and len(keys) > threads:
        from concurrent.futures import ThreadPoolExecutor

        chunks = [keys[k::threads] for k in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(
                lambda chunk: _scan((index.graphs[k] for k in chunk), matcher, sim_threshold),
                chunks,
            )
        hits = [h for part in parts for h in part]
        hits.sort(key=lambda h: (-h.score, h.doc_id, h.sent_id))
    else:
        hits = _scan((index.graphs[k] for k in keys), matcher, sim_threshold)
    return hits[:top_k] if top_k is not None else hits


def search_unoptimized(
    index: CorpusIndex,
    emb: EmbeddingTable,
    query_graph: AttentionGraph,
    match_params: MatchParams,
    sim_threshold: float,
    top_k: int | None = None,
    resolver: SynonymResolver | None = None,
    rebuild_from: Iterable[AttentionRecord] | None = None,
    graph_params: GraphParams | None = None,
) -> list[SearchHit]:
    """Same contract and results as `search`, but scans every sentence.

    With ``rebuild_from`` (a record stream) and ``graph_params``, graphs are
    also rebuilt on the fly instead of read from the cache, reproducing the
    fully unoptimized cost profile.
    """
    verify_index(index, emb, match_params, graph_params)
    matcher = QueryMatcher(query_graph, emb, match_params, resolver=resolver)
    if rebuild_from is not None:
        if graph_params is None:
            raise ValueError("rebuild_from requires graph_params")
        graphs: Iterator[AttentionGraph] = (
            build_graph(rec, emb, graph_params) for rec in rebuild_from
        )
    else:
        graphs = iter(index.graphs.values())
    hits = _scan(graphs, matcher, sim_threshold)
    return hits[:top_k] if top_k is not None else hits


# ---------------------------------------------------------------------------
# attribution


def attribute(
    index: CorpusIndex,
    emb: EmbeddingTable,
    behavior_queries: list[AttentionGraph],
    match_params: MatchParams,
    sim_threshold: float,
) -> list[tuple[str, int]]:
    """Vote for the attack actor: a document matches when any of its sentences
    scores above ``sim_threshold`` against any behavior; actors are ranked by
    the number of distinct matching labeled documents (ties alphabetical)."""
    labeled = {doc: m.actor for doc, m in index.meta.items() if m.actor}
    if not labeled:
        raise EmptyAttributionError("no indexed document carries an actor label")
    resolver = SynonymResolver(emb, match_params)
    matched_docs: set[str] = set()
    for query_graph in behavior_queries:
        for hit in search(
            index, emb, query_graph, match_params, sim_threshold, resolver=resolver
        ):
            matched_docs.add(hit.doc_id)
    counts: dict[str, int] = {}
    for doc in matched_docs:
        actor = labeled.get(doc)
        if actor is not None:
            counts[actor] = counts.get(actor, 0) + 1
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))
