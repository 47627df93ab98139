"""Tokenizer and masked-LM training."""

from __future__ import annotations

import pytest

from ctipipeline import PipelineConfig, Sentence, load_artifact, train_tokenizer, train_tokenizer_and_mlm

from conftest import toy_sentences


def test_loss_decreases_across_epochs(trained):
    _, result = trained
    assert len(result.epoch_losses) == 2
    assert result.epoch_losses[1] < result.epoch_losses[0]


def test_artifact_carries_fingerprint(trained, tiny_config):
    out_dir, _ = trained
    model, tokenizer, fingerprint = load_artifact(out_dir, tiny_config.fingerprint())
    assert fingerprint == tiny_config.fingerprint()
    assert (out_dir / "tokenizer.json").exists()
    assert (out_dir / "pipeline_config.json").exists()


def test_fingerprint_mismatch_rejected(trained, tiny_config):
    out_dir, _ = trained
    other = PipelineConfig(
        layers=tiny_config.layers,
        hidden=tiny_config.hidden,
        heads=tiny_config.heads,
        seed=tiny_config.seed + 1,
    )
    with pytest.raises(ValueError):
        load_artifact(out_dir, other.fingerprint())


def test_tiny_bpe_vocab_trains(tmp_path):
    cfg = PipelineConfig(
        layers=1, hidden=32, heads=2, bpe_vocab=50, max_len=32,
        epochs_mlm=1, batch_size=16, seed=3,
    )
    sentences = toy_sentences(60, seed=2)
    result = train_tokenizer_and_mlm(sentences, cfg, tmp_path / "m")
    assert result.vocab_size <= 50
    assert len(result.epoch_losses) == 1


def test_placeholders_are_atomic_tokens(toy_corpus, tiny_config):
    sentences = list(toy_corpus[:100])
    sentences.append(Sentence("ioc", 0, ("implant", "beacon", "<ip>", "<url>")))
    sentences.append(Sentence("ioc", 1, ("drop", "<file>", "<hash>")))
    tokenizer = train_tokenizer(sentences, tiny_config)
    for token in ("<ip>", "<url>", "<file>", "<hash>", "<cve>", "<registry>"):
        encoded = tokenizer.encode(token, add_special_tokens=False)
        assert encoded.ids == [tokenizer.token_to_id(token)]


def test_empty_corpus_rejected(tiny_config, tmp_path):
    with pytest.raises(ValueError):
        train_tokenizer_and_mlm([], tiny_config, tmp_path / "m")


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        PipelineConfig(mask_prob=0.0)
    with pytest.raises(ValueError):
        PipelineConfig(hidden=65, heads=2)
    with pytest.raises(ValueError):
        PipelineConfig(layers=0)
