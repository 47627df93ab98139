"""HTTP service over a loaded corpus index.

The index, embedding table and synonym caches are loaded once at application
construction and shared (read-only) across requests.  Queries arrive either
as precomputed attention records or as bare word lists served through the
fully-connected degraded mode.
"""

from __future__ import annotations

import os
import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .errors import CtiSearchError, InterchangeError, StaleIndexError
from .graphs import AttentionGraph, GraphParams, build_fully_connected, build_graph
from .index import CorpusIndex, attribute, candidates, load_index, search, verify_index
from .interchange import EmbeddingTable, read_embeddings, record_from_payload
from .matching import MatchParams, SynonymResolver

__all__ = ["create_app", "app_from_env"]

DEFAULT_SIM_THRESHOLD = 1.0


# ---------------------------------------------------------------------------
# request / response models


class RecordPayload(BaseModel):
    doc_id: str = "query"
    sent_id: int = 0
    words: list[str]
    attention: list[list[float]]


class QueryBase(BaseModel):
    record: RecordPayload | None = None
    words: list[str] | None = None
    fully_connected: bool = False
    sim_threshold: float = DEFAULT_SIM_THRESHOLD


class SearchRequest(QueryBase):
    top_k: int | None = Field(default=None, ge=1)
    threads: int = Field(default=1, ge=1)


class MatchedPair(BaseModel):
    query_index: int
    hit_index: int
    query_word: str
    hit_word: str
    distance: float


class HitModel(BaseModel):
    doc_id: str
    sent_id: int
    score: float
    pairs: list[MatchedPair]


class SearchResponse(BaseModel):
    hits: list[HitModel]
    candidates: int
    query_nodes: int
    elapsed_ms: float


class AttributeRequest(BaseModel):
    queries: list[RecordPayload] | None = None
    words_queries: list[list[str]] | None = None
    fully_connected: bool = False
    sim_threshold: float = DEFAULT_SIM_THRESHOLD


class ActorCount(BaseModel):
    actor: str
    matching_documents: int


class AttributeResponse(BaseModel):
    actors: list[ActorCount]
    elapsed_ms: float


class IndexInfo(BaseModel):
    fingerprint: str
    sentences: int
    documents: int
    vocabulary: int
    corpus_words: int
    oov_words: int
    tau: float
    kappa: float
    distance_mode: str
    attention_threshold: float


# ---------------------------------------------------------------------------
# app


class ServiceState:
    def __init__(
        self,
        index: CorpusIndex,
        emb: EmbeddingTable,
        graph_params: GraphParams,
        match_params: MatchParams,
    ):
        verify_index(index, emb, match_params, graph_params)
        self.index = index
        self.emb = emb
        self.graph_params = graph_params
        self.match_params = match_params
        self.resolver = SynonymResolver(emb, match_params)

    def query_graph(self, payload: QueryBase) -> AttentionGraph:
        if (payload.record is None) == (payload.words is None):
            raise HTTPException(
                status_code=422, detail="provide exactly one of 'record' or 'words'"
            )
        if payload.record is not None:
            try:
                rec = record_from_payload(payload.record.model_dump())
            except InterchangeError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            return build_graph(rec, self.emb, self.graph_params)
        if not payload.fully_connected:
            raise HTTPException(
                status_code=422, detail="word queries require fully_connected=true"
            )
        return self.words_graph(payload.words or [])

    def words_graph(self, words: list[str]) -> AttentionGraph:
        n = len(words)
        if n == 0:
            raise HTTPException(status_code=422, detail="empty word query")
        try:
            rec = record_from_payload(
                {
                    "doc_id": "query",
                    "sent_id": 0,
                    "words": list(words),
                    "attention": [[0.0] * n for _ in range(n)],
                }
            )
        except InterchangeError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return build_fully_connected(rec, self.emb, self.graph_params)


def _hit_models(hits) -> list[HitModel]:
    out = []
    for h in hits:
        pairs = [
            MatchedPair(
                query_index=i,
                hit_index=j,
                query_word=w1,
                hit_word=w2,
                distance=d,
            )
            for (i, j), (w1, w2), d in zip(
                h.match_set.pairs, h.match_set.word_pairs, h.match_set.distances
            )
        ]
        out.append(HitModel(doc_id=h.doc_id, sent_id=h.sent_id, score=h.score, pairs=pairs))
    return out


def create_app(
    index_dir: str,
    embeddings_path: str,
    graph_params: GraphParams | None = None,
    match_params: MatchParams | None = None,
) -> FastAPI:
    state = ServiceState(
        index=load_index(index_dir),
        emb=read_embeddings(embeddings_path),
        graph_params=graph_params or GraphParams(),
        match_params=match_params or MatchParams(),
    )
    app = FastAPI(title="ctisearch", version="0.1.0")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "sentences": state.index.stats.sentences}

    @app.get("/index/info", response_model=IndexInfo)
    def index_info() -> IndexInfo:
        fp = state.index.fingerprint
        stats = state.index.stats
        return IndexInfo(
            fingerprint=fp.digest,
            sentences=stats.sentences,
            documents=stats.documents,
            vocabulary=stats.vocab_size,
            corpus_words=stats.corpus_words,
            oov_words=stats.oov_words,
            tau=fp.tau,
            kappa=fp.kappa,
            distance_mode=fp.distance_mode,
            attention_threshold=fp.attention_threshold,
        )

    @app.post("/search", response_model=SearchResponse)
    def do_search(req: SearchRequest) -> SearchResponse:
        started = time.perf_counter()
        graph = state.query_graph(req)
        try:
            hits = search(
                state.index,
                state.emb,
                graph,
                state.match_params,
                sim_threshold=req.sim_threshold,
                top_k=req.top_k,
                resolver=state.resolver,
                threads=req.threads,
            )
            n_candidates = len(candidates(state.index, graph))
        except StaleIndexError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return SearchResponse(
            hits=_hit_models(hits),
            candidates=n_candidates,
            query_nodes=len(graph.nodes),
            elapsed_ms=(time.perf_counter() - started) * 1e3,
        )

    @app.post("/attribute", response_model=AttributeResponse)
    def do_attribute(req: AttributeRequest) -> AttributeResponse:
        started = time.perf_counter()
        if (req.queries is None) == (req.words_queries is None):
            raise HTTPException(
                status_code=422, detail="provide exactly one of 'queries' or 'words_queries'"
            )
        graphs: list[AttentionGraph] = []
        if req.queries is not None:
            for payload in req.queries:
                graphs.append(
                    state.query_graph(QueryBase(record=payload, sim_threshold=req.sim_threshold))
                )
        else:
            if not req.fully_connected:
                raise HTTPException(
                    status_code=422, detail="word queries require fully_connected=true"
                )
            for words in req.words_queries or []:
                graphs.append(state.words_graph(words))
        if not graphs:
            raise HTTPException(status_code=422, detail="no queries given")
        try:
            ranked = attribute(
                state.index, state.emb, graphs, state.match_params, req.sim_threshold
            )
        except CtiSearchError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return AttributeResponse(
            actors=[ActorCount(actor=a, matching_documents=c) for a, c in ranked],
            elapsed_ms=(time.perf_counter() - started) * 1e3,
        )

    return app


def app_from_env() -> FastAPI:
    """Factory for ``uvicorn 'ctisearch.service:app_from_env' --factory``;
    reads CTISEARCH_INDEX and CTISEARCH_EMBEDDINGS."""
    index_dir = os.environ.get("CTISEARCH_INDEX")
    embeddings = os.environ.get("CTISEARCH_EMBEDDINGS")
    if not index_dir or not embeddings:
        raise RuntimeError("set CTISEARCH_INDEX and CTISEARCH_EMBEDDINGS")
    return create_app(index_dir, embeddings)
