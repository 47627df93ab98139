"""CLI behavior: exit codes, output shapes, determinism."""

from __future__ import annotations

import json

import pytest

from ctisearch.cli import main


def run_cli(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# build-index


def test_build_index_happy_path(demo_paths, tmp_path, capsys):
    out_dir = tmp_path / "idx"
    code, out, _ = run_cli(
        capsys,
        "build-index",
        "--attentions", str(demo_paths["attentions"]),
        "--embeddings", str(demo_paths["embeddings"]),
        "--meta", str(demo_paths["meta"]),
        "--out", str(out_dir),
    )
    assert code == 0
    assert "indexed 5 sentences" in out
    for fname in ("graphs.jsonl", "clusters.jsonl", "meta.jsonl", "fingerprint.json"):
        assert (out_dir / fname).exists()


def test_build_index_missing_embeddings_is_usage_error(demo_paths, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(
            [
                "build-index",
                "--attentions", str(demo_paths["attentions"]),
                "--out", str(tmp_path / "idx"),
            ]
        )
    assert exc.value.code == 2


def test_build_index_malformed_line_cites_line(demo_paths, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    good = '{"doc_id":"d","sent_id":0,"words":["x"],"attention":[[0.0]]}'
    bad.write_text(good + "\n{broken\n", encoding="utf-8")
    code, _, err = run_cli(
        capsys,
        "build-index",
        "--attentions", str(bad),
        "--embeddings", str(demo_paths["embeddings"]),
        "--out", str(tmp_path / "idx"),
    )
    assert code == 1
    assert ":2" in err


def test_build_index_mixed_fingerprints_rejected(demo_paths, tmp_path, capsys):
    import shutil

    attn = tmp_path / "attn.jsonl"
    emb = tmp_path / "emb.tsv"
    shutil.copy(demo_paths["attentions"], attn)
    shutil.copy(demo_paths["embeddings"], emb)
    (tmp_path / "attn.jsonl.fingerprint.json").write_text('{"config_fingerprint": "aaa"}')
    (tmp_path / "emb.tsv.fingerprint.json").write_text('{"config_fingerprint": "bbb"}')
    code, _, err = run_cli(
        capsys,
        "build-index",
        "--attentions", str(attn),
        "--embeddings", str(emb),
        "--out", str(tmp_path / "idx"),
    )
    assert code == 1
    assert "mixed pipeline fingerprints" in err


# ---------------------------------------------------------------------------
# query


def query_args(demo_paths, *extra):
    return (
        "query",
        "--index", str(demo_paths["index"]),
        "--embeddings", str(demo_paths["embeddings"]),
        *extra,
    )


def test_query_self_retrieval_ranks_first(demo_paths, capsys):
    code, out, _ = run_cli(
        capsys, *query_args(demo_paths, "--query-attn", str(demo_paths["query"]))
    )
    assert code == 0
    first = out.strip().splitlines()[0]
    assert "lazarus-1#0" in first


def test_query_json_schema(demo_paths, capsys):
    code, out, _ = run_cli(
        capsys,
        *query_args(demo_paths, "--query-attn", str(demo_paths["query"]), "--json"),
    )
    assert code == 0
    obj = json.loads(out)
    assert set(obj) == {"hits", "candidates", "query_nodes"}
    hit = obj["hits"][0]
    assert set(hit) == {"doc_id", "sent_id", "score", "pairs"}
    assert {"query_index", "hit_index", "query_word", "hit_word", "distance"} == set(
        hit["pairs"][0]
    )


def test_query_top_k(demo_paths, capsys):
    code, out, _ = run_cli(
        capsys,
        *query_args(
            demo_paths,
            "--query-attn", str(demo_paths["query"]),
            "--top-k", "1",
            "--json",
        ),
    )
    assert code == 0
    assert len(json.loads(out)["hits"]) == 1


def test_query_words_requires_fully_connected(demo_paths):
    with pytest.raises(SystemExit) as exc:
        main(list(query_args(demo_paths, "--query-words", "dropper payload")))
    assert exc.value.code == 2


def test_query_words_fully_connected(demo_paths, capsys):
    code, out, _ = run_cli(
        capsys,
        *query_args(
            demo_paths,
            "--query-words", "dropper payload encrypted",
            "--fully-connected",
            "--json",
        ),
    )
    assert code == 0
    hits = json.loads(out)["hits"]
    assert hits[0]["doc_id"].startswith("lazarus")


def test_query_unoptimized_same_output(demo_paths, capsys):
    base = query_args(demo_paths, "--query-attn", str(demo_paths["query"]), "--json")
    code_a, out_a, _ = run_cli(capsys, *base)
    code_b, out_b, _ = run_cli(capsys, *base, "--unoptimized")
    assert code_a == code_b == 0
    assert json.loads(out_a)["hits"] == json.loads(out_b)["hits"]


def test_query_threads_same_output(demo_paths, capsys):
    base = query_args(demo_paths, "--query-attn", str(demo_paths["query"]), "--json")
    _, out_a, _ = run_cli(capsys, *base)
    _, out_b, _ = run_cli(capsys, *base, "--threads", "3")
    assert json.loads(out_a) == json.loads(out_b)


def test_query_stale_params_runtime_error(demo_paths, capsys):
    code, _, err = run_cli(
        capsys,
        *query_args(
            demo_paths, "--query-attn", str(demo_paths["query"]), "--tau", "0.9"
        ),
    )
    assert code == 1
    assert "tau" in err


def test_query_deterministic(demo_paths, capsys):
    args = query_args(demo_paths, "--query-attn", str(demo_paths["query"]), "--json")
    _, out_a, _ = run_cli(capsys, *args)
    _, out_b, _ = run_cli(capsys, *args)
    assert out_a == out_b


# ---------------------------------------------------------------------------
# attribute


def test_attribute_ranks_planted_actor(demo_paths, capsys):
    code, out, _ = run_cli(
        capsys,
        "attribute",
        "--behaviors", str(demo_paths["behaviors"]),
        "--index", str(demo_paths["index"]),
        "--embeddings", str(demo_paths["embeddings"]),
        "--sim-threshold", "5.0",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "Lazarus\t2"


# ---------------------------------------------------------------------------
# eval


def make_behavior_file(tmp_path):
    f = tmp_path / "behaviors-eval.jsonl"
    entries = [
        {
            "behavior_id": "drop-payload",
            "description_sents": [["lazarus-1", 0]],
            "case_sents": [["lazarus-2", 0]],
        },
        {
            "behavior_id": "proc-list",
            "description_sents": [["lazarus-1", 1]],
            "case_sents": [["turla-1", 0]],
        },
    ]
    f.write_text("".join(json.dumps(e) + "\n" for e in entries), encoding="utf-8")
    return f


def test_eval_seeded_runs_identical(demo_paths, tmp_path, capsys):
    behaviors = make_behavior_file(tmp_path)
    args = (
        "eval",
        "--attentions", str(demo_paths["attentions"]),
        "--embeddings", str(demo_paths["embeddings"]),
        "--behaviors-file", str(behaviors),
        "--thresholds", "1.0,5.0",
        "--seed", "7",
        "--json",
    )
    code_a, out_a, _ = run_cli(capsys, *args)
    code_b, out_b, _ = run_cli(capsys, *args)
    assert code_a == code_b == 0
    assert out_a == out_b
    json.loads(out_a)


def test_eval_writes_report_file(demo_paths, tmp_path, capsys):
    behaviors = make_behavior_file(tmp_path)
    out_file = tmp_path / "report.json"
    code, out, _ = run_cli(
        capsys,
        "eval",
        "--attentions", str(demo_paths["attentions"]),
        "--embeddings", str(demo_paths["embeddings"]),
        "--behaviors-file", str(behaviors),
        "--thresholds", "1.0",
        "--out", str(out_file),
    )
    assert code == 0
    assert "best threshold" in out
    json.loads(out_file.read_text())


def test_eval_ablation_flag(demo_paths, tmp_path, capsys):
    behaviors = make_behavior_file(tmp_path)
    code, out, _ = run_cli(
        capsys,
        "eval",
        "--attentions", str(demo_paths["attentions"]),
        "--embeddings", str(demo_paths["embeddings"]),
        "--behaviors-file", str(behaviors),
        "--thresholds", "1.0",
        "--ablation", "no-embedding",
    )
    assert code == 0


# ---------------------------------------------------------------------------
# bench


def test_bench_csv_shape(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, out, _ = run_cli(
        capsys,
        "bench",
        "--sizes", "60,120",
        "--query-sizes", "4",
        "--repetitions", "1",
        "--out", str(out_csv),
    )
    assert code == 0
    lines = out_csv.read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 1 * 4  # header + sizes x qsizes x methods
    assert "method" in out


# ---------------------------------------------------------------------------
# config file


def test_config_file_with_flag_override(demo_paths, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "index": str(demo_paths["index"]),
                "embeddings": str(demo_paths["embeddings"]),
                "sim_threshold": 1.0,
                "top_k": 5,
            }
        ),
        encoding="utf-8",
    )
    code, out, _ = run_cli(
        capsys,
        "query",
        "--config", str(config),
        "--query-attn", str(demo_paths["query"]),
        "--top-k", "1",
        "--json",
    )
    assert code == 0
    assert len(json.loads(out)["hits"]) == 1  # flag beat the config's 5


def test_config_unknown_key_rejected(demo_paths, tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text('{"mystery": 1}', encoding="utf-8")
    code, _, err = run_cli(
        capsys,
        "query",
        "--config", str(config),
        "--query-attn", str(demo_paths["query"]),
    )
    assert code == 1
    assert "mystery" in err
