"""Query-latency benchmark over the four search configurations.

Methods, per query:

* ``baseline``  — simple word matching: preprocess each corpus sentence and
  count common words with the query.
* ``no-opt``    — graph matching with graphs rebuilt on the fly and a full
  corpus scan.
* ``gc``        — cached graphs, full scan.
* ``gc-sc``     — cached graphs plus synonym-cluster candidate pruning.

Timings are wall-clock per query, run sequentially for stability; index
construction is never inside the timed region.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .graphs import GraphParams, build_graph, preprocess_words
from .index import build_index, search, search_unoptimized
from .interchange import AttentionRecord, EmbeddingTable
from .matching import MatchParams, SynonymResolver
from .synthetic import synthetic_embeddings, synthetic_records

__all__ = ["BenchRow", "bench_query_time", "write_bench_csv", "baseline_word_match_scan"]

METHODS = ("baseline", "no-opt", "gc", "gc-sc")


@dataclass(frozen=True)
class BenchRow:
    method: str
    n_sentences: int
    query_words: int
    repetitions: int
    avg_s: float
    min_s: float
    max_s: float
    samples: tuple[float, ...]

    @property
    def median_s(self) -> float:
        return statistics.median(self.samples)


def baseline_word_match_scan(
    records: Sequence[AttentionRecord],
    query_words: Iterable[str],
    graph_params: GraphParams,
) -> list[tuple[tuple[str, int], int]]:
    """Rank sentences by the number of (preprocessed) words shared with the query."""
    query = {w for _, w in preprocess_words(list(query_words), graph_params)}
    hits = []
    for rec in records:
        common = sum(1 for _, w in preprocess_words(rec.words, graph_params) if w in query)
        if common:
            hits.append(((rec.doc_id, rec.sent_id), common))
    hits.sort(key=lambda item: (-item[1], item[0]))
    return hits


def _time(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


def bench_query_time(
    index_sizes: Sequence[int],
    query_word_counts: Sequence[int],
    repetitions: int,
    graph_params: GraphParams | None = None,
    match_params: MatchParams | None = None,
    sim_threshold: float = 1.0,
    seed: int = 0,
    records: Sequence[AttentionRecord] | None = None,
    emb: EmbeddingTable | None = None,
    methods: Sequence[str] = METHODS,
) -> list[BenchRow]:
    """Latency table over sizes x query sizes x methods.

    Without ``records``/``emb`` a seeded synthetic corpus is generated at each
    size.  ``repetitions`` distinct queries are timed once each (sequentially);
    0 repetitions yields an empty table.
    """
    if repetitions <= 0:
        return []
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown bench methods: {sorted(unknown)}")
    graph_params = graph_params or GraphParams()
    match_params = match_params or MatchParams()
    rows: list[BenchRow] = []
    for size in index_sizes:
        if records is not None:
            if len(records) < size:
                raise ValueError(f"corpus has {len(records)} sentences, need {size}")
            corpus = list(records[:size])
            table = emb
            if table is None:
                raise ValueError("records were supplied without an embedding table")
        else:
            table = synthetic_embeddings(max(500, size // 8), dimension=128, seed=seed)
            corpus = synthetic_records(table, size, seed=seed + 1)
        index = build_index(corpus, table, graph_params, match_params)
        for qwords in query_word_counts:
            queries = synthetic_records(
                table,
                repetitions,
                seed=seed + 7919 + qwords,
                words_range=(qwords, qwords),
                sentences_per_doc=1,
            )
            samples: dict[str, list[float]] = {m: [] for m in methods}
            for q_rec in queries:
                q_graph = build_graph(q_rec, table, graph_params)
                if "baseline" in samples:
                    samples["baseline"].append(
                        _time(lambda: baseline_word_match_scan(corpus, q_rec.words, graph_params))
                    )
                if "no-opt" in samples:
                    samples["no-opt"].append(
                        _time(
                            lambda: search_unoptimized(
                                index,
                                table,
                                q_graph,
                                match_params,
                                sim_threshold,
                                resolver=SynonymResolver(table, match_params),
                                rebuild_from=corpus,
                                graph_params=graph_params,
                            )
                        )
                    )
                if "gc" in samples:
                    samples["gc"].append(
                        _time(
                            lambda: search_unoptimized(
                                index,
                                table,
                                q_graph,
                                match_params,
                                sim_threshold,
                                resolver=SynonymResolver(table, match_params),
                            )
                        )
                    )
                if "gc-sc" in samples:
                    samples["gc-sc"].append(
                        _time(
                            lambda: search(
                                index,
                                table,
                                q_graph,
                                match_params,
                                sim_threshold,
                                resolver=SynonymResolver(table, match_params),
                            )
                        )
                    )
            for method in methods:
                times = samples[method]
                rows.append(
                    BenchRow(
                        method=method,
                        n_sentences=size,
                        query_words=qwords,
                        repetitions=repetitions,
                        avg_s=sum(times) / len(times),
                        min_s=min(times),
                        max_s=max(times),
                        samples=tuple(times),
                    )
                )
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["method", "n_sentences", "query_words", "repetitions", "avg_s", "min_s", "max_s"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    row.n_sentences,
                    row.query_words,
                    row.repetitions,
                    f"{row.avg_s:.6f}",
                    f"{row.min_s:.6f}",
                    f"{row.max_s:.6f}",
                ]
            )
