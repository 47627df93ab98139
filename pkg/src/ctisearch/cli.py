"""Command-line interface.

Subcommands wrap exactly one library entry point each; ``query`` and
``attribute`` can also run as thin HTTP clients against a running service
(``--server``).  Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .bench import bench_query_time, write_bench_csv
from .errors import CtiSearchError
from .evalharness import build_behavior_cases, run_protocol
from .graphs import GraphParams, build_fully_connected, build_graph, default_stopwords
from .index import (
    attribute,
    build_index,
    candidates,
    load_index,
    save_index,
    search,
    search_unoptimized,
)
from .interchange import (
    AttentionRecord,
    read_attention_file,
    read_doc_meta,
    read_embeddings,
    read_fingerprint_sidecar,
    record_from_payload,
)
from .matching import MatchParams

CONFIG_KEYS = (
    "attention_threshold",
    "tau",
    "kappa",
    "distance_mode",
    "sim_threshold",
    "top_k",
    "stopword_file",
    "embeddings",
    "attentions",
    "meta",
    "index",
)

DEFAULTS = {
    "attention_threshold": 0.15,
    "tau": 0.37,
    "kappa": 2.72,
    "distance_mode": "half-cosine",
    "sim_threshold": 1.0,
    "top_k": None,
}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(obj, dict):
        raise CtiSearchError(f"config {path} must hold a JSON object")
    unknown = set(obj) - set(CONFIG_KEYS)
    if unknown:
        raise CtiSearchError(f"unknown config keys: {sorted(unknown)}")
    return obj


class Settings:
    """Flag > config file > paper defaults."""

    def __init__(self, args: argparse.Namespace):
        self.config = _load_config(getattr(args, "config", None))
        self.args = args

    def get(self, key: str, fallback=None):
        value = getattr(self.args, key, None)
        if value is not None:
            return value
        if key in self.config and self.config[key] is not None:
            return self.config[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        return fallback

    def graph_params(self) -> GraphParams:
        stopword_file = self.get("stopword_file")
        stopwords = (
            frozenset(Path(stopword_file).read_text(encoding="utf-8").split())
            if stopword_file
            else default_stopwords()
        )
        return GraphParams(
            attention_threshold=float(self.get("attention_threshold")),
            stopword_list=stopwords,
        )

    def match_params(self) -> MatchParams:
        return MatchParams(
            tau=float(self.get("tau")),
            kappa=float(self.get("kappa")),
            distance_mode=str(self.get("distance_mode")),
        )


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _single_query_record(path: str) -> AttentionRecord:
    records = list(read_attention_file(path))
    if len(records) != 1:
        raise CtiSearchError(f"{path} must hold exactly one query record (found {len(records)})")
    return records[0]


def _words_record(words: list[str]) -> AttentionRecord:
    n = len(words)
    if n == 0:
        raise CtiSearchError("empty word query")
    return record_from_payload(
        {
            "doc_id": "query",
            "sent_id": 0,
            "words": [w.lower() for w in words],
            "attention": [[0.0] * n for _ in range(n)],
        }
    )


def _hits_obj(hits, n_candidates: int, query_nodes: int) -> dict:
    return {
        "hits": [
            {
                "doc_id": h.doc_id,
                "sent_id": h.sent_id,
                "score": h.score,
                "pairs": [
                    {
                        "query_index": i,
                        "hit_index": j,
                        "query_word": w1,
                        "hit_word": w2,
                        "distance": d,
                    }
                    for (i, j), (w1, w2), d in zip(
                        h.match_set.pairs, h.match_set.word_pairs, h.match_set.distances
                    )
                ],
            }
            for h in hits
        ],
        "candidates": n_candidates,
        "query_nodes": query_nodes,
    }


def _print_hits(obj: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(obj, indent=2, sort_keys=True))
        return
    hits = obj["hits"]
    if not hits:
        print("no hits")
        return
    for rank, h in enumerate(hits, start=1):
        pairs = " ".join(
            f"{p['query_word']}~{p['hit_word']}({p['distance']:.3f})" for p in h["pairs"]
        )
        print(f"{rank:>3}  {h['score']:>12.6f}  {h['doc_id']}#{h['sent_id']}  {pairs}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_index(args) -> int:
    settings = Settings(args)
    started = time.perf_counter()
    sidecars = {}
    for path in (args.attentions, args.embeddings, args.meta):
        if path:
            fp = read_fingerprint_sidecar(path)
            if fp is not None:
                sidecars[path] = fp
    if len(set(sidecars.values())) > 1:
        return _fail(f"mixed pipeline fingerprints across inputs: {sidecars}")
    emb = read_embeddings(args.embeddings)
    meta = read_doc_meta(args.meta) if args.meta else {}
    index = build_index(
        read_attention_file(args.attentions),
        emb,
        settings.graph_params(),
        settings.match_params(),
        meta=meta,
    )
    save_index(index, args.out)
    elapsed = time.perf_counter() - started
    stats = index.stats
    print(
        f"indexed {stats.sentences} sentences from {stats.documents} documents "
        f"({stats.corpus_words} distinct corpus words, vocabulary {stats.vocab_size}, "
        f"{stats.oov_words} out-of-vocabulary occurrences) in {elapsed:.2f}s -> {args.out}"
    )
    return 0


def _query_via_server(server: str, payload: dict, endpoint: str) -> dict:
    import httpx

    response = httpx.post(server.rstrip("/") + endpoint, json=payload, timeout=120.0)
    if response.status_code != 200:
        raise CtiSearchError(f"server returned {response.status_code}: {response.text}")
    return response.json()


def cmd_query(args, parser: argparse.ArgumentParser) -> int:
    settings = Settings(args)
    if bool(args.query_attn) == bool(args.query_words):
        parser.error("provide exactly one of --query-attn or --query-words")
    if args.query_words and not args.fully_connected:
        parser.error("--query-words requires --fully-connected")
    sim_threshold = float(settings.get("sim_threshold"))
    top_k = settings.get("top_k")
    top_k = int(top_k) if top_k is not None else None

    if args.server:
        if args.query_attn:
            rec = _single_query_record(args.query_attn)
            payload = {
                "record": {
                    "doc_id": rec.doc_id,
                    "sent_id": rec.sent_id,
                    "words": list(rec.words),
                    "attention": rec.attention.tolist(),
                },
                "sim_threshold": sim_threshold,
                "top_k": top_k,
                "threads": args.threads or 1,
            }
        else:
            payload = {
                "words": args.query_words.split(),
                "fully_connected": True,
                "sim_threshold": sim_threshold,
                "top_k": top_k,
                "threads": args.threads or 1,
            }
        obj = _query_via_server(args.server, payload, "/search")
        obj.pop("elapsed_ms", None)
        _print_hits(obj, args.json)
        return 0

    index_dir = settings.get("index") or parser.error("--index is required without --server")
    emb = read_embeddings(settings.get("embeddings") or parser.error("--embeddings is required"))
    index = load_index(index_dir)
    graph_params = settings.graph_params()
    match_params = settings.match_params()
    if args.query_attn:
        rec = _single_query_record(args.query_attn)
        query_graph = build_graph(rec, emb, graph_params)
    else:
        query_graph = build_fully_connected(_words_record(args.query_words.split()), emb, graph_params)
    fn = search_unoptimized if args.unoptimized else search
    kwargs = {} if args.unoptimized else {"threads": args.threads or 1}
    hits = fn(index, emb, query_graph, match_params, sim_threshold, top_k=top_k, **kwargs)
    obj = _hits_obj(hits, len(candidates(index, query_graph)), len(query_graph.nodes))
    _print_hits(obj, args.json)
    return 0


def cmd_attribute(args, parser: argparse.ArgumentParser) -> int:
    settings = Settings(args)
    sim_threshold = float(settings.get("sim_threshold"))
    records = list(read_attention_file(args.behaviors))
    if not records:
        return _fail(f"no behavior queries in {args.behaviors}")

    if args.server:
        payload = {
            "queries": [
                {
                    "doc_id": r.doc_id,
                    "sent_id": r.sent_id,
                    "words": list(r.words),
                    "attention": r.attention.tolist(),
                }
                for r in records
            ],
            "sim_threshold": sim_threshold,
        }
        obj = _query_via_server(args.server, payload, "/attribute")
        ranked = [(a["actor"], a["matching_documents"]) for a in obj["actors"]]
    else:
        index_dir = settings.get("index") or parser.error("--index is required without --server")
        emb = read_embeddings(settings.get("embeddings") or parser.error("--embeddings is required"))
        index = load_index(index_dir)
        graphs = [build_graph(r, emb, settings.graph_params()) for r in records]
        ranked = attribute(index, emb, graphs, settings.match_params(), sim_threshold)

    if args.json:
        print(json.dumps({"actors": [{"actor": a, "matching_documents": c} for a, c in ranked]}))
    elif not ranked:
        print("no matching labeled documents")
    else:
        for actor, count in ranked:
            print(f"{actor}\t{count}")
    return 0


def cmd_eval(args, parser: argparse.ArgumentParser) -> int:
    settings = Settings(args)
    emb = read_embeddings(settings.get("embeddings") or parser.error("--embeddings is required"))
    attentions = settings.get("attentions") or parser.error("--attentions is required")
    thresholds = [float(tok) for tok in args.thresholds.split(",") if tok]
    cases = build_behavior_cases(args.behaviors_file, seed=args.seed)
    report = run_protocol(
        cases,
        list(read_attention_file(attentions)),
        emb,
        settings.graph_params(),
        settings.match_params(),
        thresholds,
        variant=args.ablation,
    )
    if args.out:
        Path(args.out).write_text(report.to_json(indent=2) + "\n", encoding="utf-8")
    if args.json:
        print(report.to_json(indent=2))
    else:
        print(report.format_text())
    return 0


def cmd_bench(args, parser: argparse.ArgumentParser) -> int:
    settings = Settings(args)
    sizes = [int(tok) for tok in args.sizes.split(",") if tok]
    query_sizes = [int(tok) for tok in args.query_sizes.split(",") if tok]
    records = None
    emb = None
    attentions = settings.get("attentions")
    if attentions:
        records = list(read_attention_file(attentions))
        emb = read_embeddings(settings.get("embeddings") or parser.error("--embeddings required with --attentions"))
    rows = bench_query_time(
        sizes,
        query_sizes,
        repetitions=args.repetitions,
        graph_params=settings.graph_params(),
        match_params=settings.match_params(),
        sim_threshold=float(settings.get("sim_threshold")),
        seed=args.seed,
        records=records,
        emb=emb,
    )
    if args.out:
        write_bench_csv(rows, args.out)
    print(f"{'method':>10} {'sentences':>10} {'qwords':>7} {'avg_s':>10} {'min_s':>10} {'max_s':>10}")
    for row in rows:
        print(
            f"{row.method:>10} {row.n_sentences:>10} {row.query_words:>7}"
            f" {row.avg_s:>10.4f} {row.min_s:>10.4f} {row.max_s:>10.4f}"
        )
    return 0


def cmd_serve(args, parser: argparse.ArgumentParser) -> int:
    settings = Settings(args)
    index_dir = settings.get("index") or parser.error("--index is required")
    embeddings = settings.get("embeddings") or parser.error("--embeddings is required")
    from .service import create_app

    app = create_app(
        str(index_dir),
        str(embeddings),
        graph_params=settings.graph_params(),
        match_params=settings.match_params(),
    )
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--attention-threshold", dest="attention_threshold", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--distance-mode", dest="distance_mode",
                   choices=["half-cosine", "minmax-euclidean", "exact-word"])
    p.add_argument("--stopword-file", dest="stopword_file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctisearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="build and persist a corpus index")
    p.add_argument("--attentions", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--meta")
    _add_param_flags(p)
    p.set_defaults(func=lambda a: cmd_build_index(a))

    p = sub.add_parser("query", help="search an index with one query sentence")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--query-attn", dest="query_attn")
    p.add_argument("--query-words", dest="query_words")
    p.add_argument("--fully-connected", dest="fully_connected", action="store_true")
    p.add_argument("--sim-threshold", dest="sim_threshold", type=float)
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--unoptimized", action="store_true", help="bypass candidate pruning")
    p.add_argument("--json", action="store_true")
    p.add_argument("--server", help="route the query through a running service")
    _add_param_flags(p)
    p.set_defaults(func=lambda a, _p=p: cmd_query(a, _p))

    p = sub.add_parser("attribute", help="rank actors by matching documents")
    p.add_argument("--behaviors", required=True, help="attention records, one per behavior query")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--sim-threshold", dest="sim_threshold", type=float)
    p.add_argument("--json", action="store_true")
    p.add_argument("--server")
    _add_param_flags(p)
    p.set_defaults(func=lambda a, _p=p: cmd_attribute(a, _p))

    p = sub.add_parser("eval", help="threshold-sweep retrieval evaluation")
    p.add_argument("--attentions")
    p.add_argument("--embeddings")
    p.add_argument("--behaviors-file", dest="behaviors_file", required=True)
    p.add_argument("--thresholds", required=True, help="comma-separated, ascending")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ablation", choices=["no-attention", "no-embedding"])
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", help="write the JSON report here as well")
    _add_param_flags(p)
    p.set_defaults(func=lambda a, _p=p: cmd_eval(a, _p))

    p = sub.add_parser("bench", help="query-latency benchmark")
    p.add_argument("--sizes", required=True, help="comma-separated corpus sizes")
    p.add_argument("--query-sizes", dest="query_sizes", default="5,10")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attentions", help="bench over a real corpus instead of synthetic")
    p.add_argument("--embeddings")
    p.add_argument("--out", help="CSV output path")
    _add_param_flags(p)
    p.set_defaults(func=lambda a, _p=p: cmd_bench(a, _p))

    p = sub.add_parser("serve", help="run the HTTP service over an index")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    _add_param_flags(p)
    p.set_defaults(func=lambda a, _p=p: cmd_serve(a, _p))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CtiSearchError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
