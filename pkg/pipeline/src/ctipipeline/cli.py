"""Pipeline CLI: ``ctipipeline normalize|train|embed|export --config <json>``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, write_sidecar
from .export import export_attentions
from .mlm import train_tokenizer_and_mlm
from .normalize import normalize_corpus, read_corpus_file, read_text_dir, write_corpus_file
from .word2vec import train_word_embeddings, write_embeddings_tsv


def _config(args) -> PipelineConfig:
    if args.config:
        return PipelineConfig.from_json(args.config)
    return PipelineConfig()


def cmd_normalize(args) -> int:
    config = _config(args)
    docs = list(read_text_dir(args.input))
    if not docs:
        print(f"error: no .txt documents in {args.input}", file=sys.stderr)
        return 1
    sentences = list(normalize_corpus(docs, config))
    count = write_corpus_file(sentences, args.out, config)
    if args.meta_out:
        with open(args.meta_out, "w", encoding="utf-8") as fh:
            for doc_id, _ in docs:
                extra_path = Path(args.input) / f"{doc_id}.meta.json"
                obj = {"doc_id": doc_id}
                if extra_path.exists():
                    extra = json.loads(extra_path.read_text(encoding="utf-8"))
                    for key in ("vendor", "actor", "date", "url"):
                        if key in extra:
                            obj[key] = extra[key]
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
        write_sidecar(args.meta_out, config)
    print(f"normalized {len(docs)} documents into {count} sentences -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _config(args)
    sentences = read_corpus_file(args.corpus)
    result = train_tokenizer_and_mlm(sentences, config, args.out)
    losses = ", ".join(f"{v:.4f}" for v in result.epoch_losses)
    print(
        f"trained MLM ({result.vocab_size} tokens) over {len(sentences)} sentences; "
        f"epoch losses: {losses} -> {result.artifact_dir}"
    )
    return 0


def cmd_embed(args) -> int:
    config = _config(args)
    sentences = read_corpus_file(args.corpus)
    vocab, matrix = train_word_embeddings(sentences, config)
    write_embeddings_tsv(vocab, matrix, args.out, config)
    print(f"trained {len(vocab)} x {config.emb_dim} embeddings -> {args.out}")
    return 0


def cmd_export(args) -> int:
    config = _config(args)
    sentences = read_corpus_file(args.corpus)
    stats = export_attentions(args.model, sentences, args.out, config)
    print(
        f"exported {stats.sentences} attention records "
        f"({stats.truncated} truncated) -> {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctipipeline", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="raw text directory -> normalized sentence corpus")
    p.add_argument("--config")
    p.add_argument("--input", required=True, help="directory of .txt documents")
    p.add_argument("--out", required=True, help="normalized corpus JSONL")
    p.add_argument("--meta-out", dest="meta_out", help="document metadata JSONL")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("train", help="train the BPE tokenizer and the masked LM")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="model artifact directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", help="train word2vec embeddings, write TSV")
    p.add_argument("--config")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("export", help="export word-level attention records")
    p.add_argument("--config")
    p.add_argument("--model", required=True, help="model artifact directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
