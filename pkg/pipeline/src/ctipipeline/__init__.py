"""Model pipeline for the CTI search core.

Produces the three interchange artifacts the search core consumes: normalized
attention records (JSON lines), word embeddings (TSV) and document metadata
(JSON lines), each with a configuration-fingerprint sidecar.
"""

from .config import PipelineConfig, read_sidecar, write_sidecar
from .export import ExportStats, export_attentions, sentence_attention
from .mlm import TrainResult, load_artifact, train_tokenizer, train_tokenizer_and_mlm
from .normalize import (
    Sentence,
    lemmatize,
    normalize_corpus,
    normalize_text,
    read_corpus_file,
    replace_iocs,
    split_sentences,
    tokenize,
    write_corpus_file,
)
from .word2vec import train_word_embeddings, write_embeddings_tsv

__version__ = "0.1.0"
