"""Pipeline CLI end-to-end: normalize -> train -> embed -> export, then the
search core's build-index consumes the artifacts (fingerprint chain intact)."""

from __future__ import annotations

import json

import pytest

from ctipipeline.cli import main
from ctipipeline.config import PipelineConfig, read_sidecar

RAW_DOCS = {
    "report-alpha": (
        "The malware connects to 10.0.0.1 and drops C:\\tmp\\payload.exe. "
        "It encrypts stolen documents. The implant beacons to https://evil.example/gate."
    ),
    "report-beta": (
        "The dropper executes an encrypted payload. "
        "It exploits CVE-2019-0708 and writes HKLM\\Software\\Run\\svc."
    ),
}


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-run")
    raw = root / "raw"
    raw.mkdir()
    for doc_id, text in RAW_DOCS.items():
        (raw / f"{doc_id}.txt").write_text(text, encoding="utf-8")
    (raw / "report-alpha.meta.json").write_text('{"actor": "Lazarus"}', encoding="utf-8")

    config = PipelineConfig(
        layers=1, hidden=32, heads=2, bpe_vocab=200, max_len=32,
        epochs_mlm=1, batch_size=8, emb_dim=16, epochs_emb=10,
        window=2, negatives=2, min_word_freq=1, seed=4,
    )
    config_path = root / "config.json"
    config.to_json(config_path)

    paths = {
        "config": config_path,
        "corpus": root / "corpus.jsonl",
        "meta": root / "meta.jsonl",
        "model": root / "model",
        "embeddings": root / "embeddings.tsv",
        "attentions": root / "attentions.jsonl",
        "config_obj": config,
    }
    assert main([
        "normalize", "--config", str(config_path), "--input", str(raw),
        "--out", str(paths["corpus"]), "--meta-out", str(paths["meta"]),
    ]) == 0
    assert main([
        "train", "--config", str(config_path),
        "--corpus", str(paths["corpus"]), "--out", str(paths["model"]),
    ]) == 0
    assert main([
        "embed", "--config", str(config_path),
        "--corpus", str(paths["corpus"]), "--out", str(paths["embeddings"]),
    ]) == 0
    assert main([
        "export", "--config", str(config_path), "--model", str(paths["model"]),
        "--corpus", str(paths["corpus"]), "--out", str(paths["attentions"]),
    ]) == 0
    return paths


def test_artifacts_exist_with_consistent_sidecars(pipeline_run):
    fp = pipeline_run["config_obj"].fingerprint()
    for key in ("corpus", "meta", "embeddings", "attentions"):
        assert pipeline_run[key].exists()
        assert read_sidecar(pipeline_run[key]) == fp


def test_meta_carries_actor(pipeline_run):
    lines = [json.loads(l) for l in pipeline_run["meta"].read_text().strip().splitlines()]
    by_id = {obj["doc_id"]: obj for obj in lines}
    assert by_id["report-alpha"]["actor"] == "Lazarus"
    assert "actor" not in by_id["report-beta"]


def test_corpus_has_placeholders(pipeline_run):
    text = pipeline_run["corpus"].read_text()
    for token in ("<ip>", "<file>", "<url>", "<cve>", "<registry>"):
        assert token in text


def test_primary_build_index_accepts_artifacts(pipeline_run, tmp_path, capsys):
    from ctisearch.cli import main as ctisearch_main

    out_dir = tmp_path / "index"
    code = ctisearch_main([
        "build-index",
        "--attentions", str(pipeline_run["attentions"]),
        "--embeddings", str(pipeline_run["embeddings"]),
        "--meta", str(pipeline_run["meta"]),
        "--out", str(out_dir),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "indexed" in out
    assert (out_dir / "fingerprint.json").exists()


def test_primary_build_index_rejects_mixed_chain(pipeline_run, tmp_path, capsys):
    import shutil

    from ctisearch.cli import main as ctisearch_main

    attn = tmp_path / "attn.jsonl"
    shutil.copy(pipeline_run["attentions"], attn)
    (tmp_path / "attn.jsonl.fingerprint.json").write_text(
        '{"config_fingerprint": "0000"}', encoding="utf-8"
    )
    emb = tmp_path / "emb.tsv"
    shutil.copy(pipeline_run["embeddings"], emb)
    shutil.copy(
        str(pipeline_run["embeddings"]) + ".fingerprint.json",
        str(emb) + ".fingerprint.json",
    )
    code = ctisearch_main([
        "build-index",
        "--attentions", str(attn),
        "--embeddings", str(emb),
        "--out", str(tmp_path / "index"),
    ])
    err = capsys.readouterr().err
    assert code == 1
    assert "mixed pipeline fingerprints" in err
