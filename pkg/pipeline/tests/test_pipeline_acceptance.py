"""Acceptance suite for the pipeline: one test per criterion, with pass lines.

The exported artifacts are validated by the search core's own readers
(``ctisearch``), exercising the interchange boundary end to end.
"""

from __future__ import annotations

import numpy as np

from ctipipeline import export_attentions, train_word_embeddings, write_embeddings_tsv
from ctipipeline.normalize import replace_iocs
from ctipipeline.config import PipelineConfig

from conftest import toy_sentences
from test_normalize import IOC_CASES


def _ok(name: str, detail: str = "") -> None:
    print(f"PASS {name}" + (f": {detail}" if detail else ""))


def test_pipeline_contract(trained, tiny_config, tmp_path, toy_corpus):
    from ctisearch import read_attention_file, read_embeddings

    out_dir, result = trained

    # toy MLM loss decreases across its two epochs
    assert result.epoch_losses[1] < result.epoch_losses[0]

    # 1K-sentence export passes primary-side validation with zero rejects
    attn_path = tmp_path / "attentions.jsonl"
    stats = export_attentions(out_dir, toy_corpus, attn_path, tiny_config)
    assert stats.sentences == len(toy_corpus) == 1000
    records = list(read_attention_file(attn_path))  # validates every invariant
    assert len(records) == 1000

    # word-level matrix side equals the lemma count for 100% of sentences
    by_key = {(s.doc_id, s.sent_id): s for s in toy_corpus}
    mismatched = sum(
        1
        for rec in records
        if rec.attention.shape != (len(by_key[(rec.doc_id, rec.sent_id)].words),) * 2
        or rec.words != by_key[(rec.doc_id, rec.sent_id)].words
    )
    assert mismatched == 0

    # toy word2vec places the planted co-occurrence pair closer than 95% of
    # random pairs; the TSV passes primary-side validation too
    vocab, matrix = train_word_embeddings(toy_corpus, tiny_config)
    emb_path = tmp_path / "embeddings.tsv"
    write_embeddings_tsv(vocab, matrix, emb_path, tiny_config)
    table = read_embeddings(emb_path)
    unit = table.unit_rows

    def cos(w1, w2):
        return float(np.dot(unit[table.row(w1)], unit[table.row(w2)]))

    planted = cos("ip", "network")
    rng = np.random.default_rng(0)
    random_cos = [
        float(np.dot(unit[a], unit[b]))
        for a, b in (rng.choice(len(vocab), size=2, replace=False) for _ in range(500))
    ]
    threshold = float(np.quantile(random_cos, 0.95))
    assert planted > threshold
    _ok(
        "pipeline contract",
        f"1000/1000 records validated, 0 shape mismatches, losses "
        f"{result.epoch_losses[0]:.3f}->{result.epoch_losses[1]:.3f}, "
        f"planted cosine {planted:.3f} > q95 {threshold:.3f}",
    )


def test_ioc_normalization_fixture():
    cfg = PipelineConfig()
    assert len(IOC_CASES) == 30
    for raw, expected in IOC_CASES:
        assert replace_iocs(raw, cfg.placeholders) == expected
    _ok("IoC normalization", "30/30 fixtures normalize to the exact placeholders")


def test_exports_feed_the_search_core(trained, tiny_config, tmp_path):
    """Integration: pipeline artifacts -> index build -> self-retrieval."""
    from ctisearch import (
        GraphParams,
        MatchParams,
        build_graph,
        build_index,
        read_attention_file,
        read_embeddings,
        search,
    )

    out_dir, _ = trained
    corpus = toy_sentences(120, seed=21)
    attn_path = tmp_path / "attn.jsonl"
    export_attentions(out_dir, corpus, attn_path, tiny_config)
    vocab, matrix = train_word_embeddings(toy_sentences(1000, seed=5), tiny_config)
    emb_path = tmp_path / "emb.tsv"
    write_embeddings_tsv(vocab, matrix, emb_path, tiny_config)

    emb = read_embeddings(emb_path)
    records = list(read_attention_file(attn_path))
    gp = GraphParams()
    mp = MatchParams()
    index = build_index(records, emb, gp, mp)
    query = build_graph(records[0], emb, gp)
    hits = search(index, emb, query, mp, sim_threshold=1.0)
    assert hits, "self-retrieval returned nothing"
    assert hits[0].key == records[0].key
    _ok("pipeline-to-core integration", f"self-retrieval over {len(records)} exported sentences")
