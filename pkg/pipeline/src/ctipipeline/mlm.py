"""BPE tokenizer training and masked-language-model pretraining.

The tokenizer never splits across whitespace, so a sentence's encoding is the
concatenation of its words' encodings; the attention exporter relies on this
to map subtoken blocks back to words.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import torch
from tokenizers import Tokenizer
from tokenizers.models import BPE
from tokenizers.pre_tokenizers import Whitespace
from tokenizers.processors import TemplateProcessing
from tokenizers.trainers import BpeTrainer
from transformers import BertConfig, BertForMaskedLM, PreTrainedTokenizerFast
from transformers.data.data_collator import DataCollatorForLanguageModeling

from .config import PipelineConfig
from .normalize import Sentence

logger = logging.getLogger(__name__)

__all__ = ["TrainResult", "train_tokenizer", "train_tokenizer_and_mlm", "load_artifact"]

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]


@dataclass
class TrainResult:
    artifact_dir: Path
    epoch_losses: list[float]
    vocab_size: int


def train_tokenizer(sentences: Sequence[Sentence], config: PipelineConfig) -> Tokenizer:
    """BPE tokenizer capped at ``config.bpe_vocab`` tokens; IoC placeholders
    are atomic special tokens."""
    if not sentences:
        raise ValueError("empty corpus")
    placeholders = sorted(set(config.placeholders.values()))
    tokenizer = Tokenizer(BPE(unk_token="[UNK]"))
    tokenizer.pre_tokenizer = Whitespace()
    trainer = BpeTrainer(
        vocab_size=config.bpe_vocab,
        special_tokens=SPECIALS + placeholders,
        show_progress=False,
    )
    tokenizer.train_from_iterator((" ".join(s.words) for s in sentences), trainer=trainer)
    tokenizer.post_processor = TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[
            ("[CLS]", tokenizer.token_to_id("[CLS]")),
            ("[SEP]", tokenizer.token_to_id("[SEP]")),
        ],
    )
    return tokenizer


def _wrap(tokenizer: Tokenizer, config: PipelineConfig) -> PreTrainedTokenizerFast:
    return PreTrainedTokenizerFast(
        tokenizer_object=tokenizer,
        pad_token="[PAD]",
        unk_token="[UNK]",
        cls_token="[CLS]",
        sep_token="[SEP]",
        mask_token="[MASK]",
        model_max_length=config.max_len,
    )


def _model_config(vocab_size: int, config: PipelineConfig) -> BertConfig:
    return BertConfig(
        vocab_size=vocab_size,
        hidden_size=config.hidden,
        num_hidden_layers=config.layers,
        num_attention_heads=config.heads,
        intermediate_size=config.hidden * 4,
        hidden_dropout_prob=config.dropout,
        attention_probs_dropout_prob=config.dropout,
        max_position_embeddings=config.max_len,
        pad_token_id=0,
    )


def train_tokenizer_and_mlm(
    sentences: Iterable[Sentence], config: PipelineConfig, out_dir: str | Path
) -> TrainResult:
    """Train the tokenizer and the masked LM; persist both with the config
    fingerprint.  Returns the mean loss of each epoch."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("empty corpus")
    torch.manual_seed(config.seed)
    tokenizer = train_tokenizer(sentences, config)
    wrapped = _wrap(tokenizer, config)
    model = BertForMaskedLM(_model_config(tokenizer.get_vocab_size(), config))
    model.train()

    encoded = [
        wrapped(" ".join(s.words), truncation=True, max_length=config.max_len)["input_ids"]
        for s in sentences
    ]
    collator = DataCollatorForLanguageModeling(
        tokenizer=wrapped, mlm=True, mlm_probability=config.mask_prob
    )
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr_mlm)
    generator = torch.Generator().manual_seed(config.seed)

    epoch_losses: list[float] = []
    for epoch in range(config.epochs_mlm):
        order = torch.randperm(len(encoded), generator=generator).tolist()
        total = 0.0
        batches = 0
        for start in range(0, len(order), config.batch_size):
            chunk = [{"input_ids": encoded[i]} for i in order[start : start + config.batch_size]]
            batch = collator(chunk)
            optimizer.zero_grad()
            out = model(input_ids=batch["input_ids"], labels=batch["labels"])
            out.loss.backward()
            optimizer.step()
            total += float(out.loss.detach())
            batches += 1
        epoch_losses.append(total / max(batches, 1))
        logger.info("mlm epoch %d/%d: loss %.4f", epoch + 1, config.epochs_mlm, epoch_losses[-1])

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    model.save_pretrained(out_dir)
    tokenizer.save(str(out_dir / "tokenizer.json"))
    config.to_json(out_dir / "pipeline_config.json")
    (out_dir / "fingerprint.json").write_text(
        json.dumps(
            {"config_fingerprint": config.fingerprint(), "epoch_losses": epoch_losses},
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return TrainResult(
        artifact_dir=out_dir,
        epoch_losses=epoch_losses,
        vocab_size=tokenizer.get_vocab_size(),
    )


def load_artifact(
    artifact_dir: str | Path, expected_fingerprint: str | None = None
) -> tuple[BertForMaskedLM, Tokenizer, str]:
    artifact_dir = Path(artifact_dir)
    meta = json.loads((artifact_dir / "fingerprint.json").read_text(encoding="utf-8"))
    fingerprint = meta["config_fingerprint"]
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise ValueError(
            f"model artifact fingerprint {fingerprint[:12]}... does not match the "
            f"requested configuration {expected_fingerprint[:12]}..."
        )
    # eager attention: sdpa kernels do not expose attention weights
    model = BertForMaskedLM.from_pretrained(artifact_dir, attn_implementation="eager")
    model.eval()
    tokenizer = Tokenizer.from_file(str(artifact_dir / "tokenizer.json"))
    return model, tokenizer, fingerprint
