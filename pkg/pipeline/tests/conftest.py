"""Shared fixtures: a deterministic toy CTI corpus and a trained tiny model."""

from __future__ import annotations

import random

import pytest

from ctipipeline import PipelineConfig, Sentence
from ctipipeline.mlm import train_tokenizer_and_mlm

# twelve disjoint topics; every word occupies one fixed slot of its topic's
# template, so words never share a slot -- except the planted pair below
_TOPIC_WORDS = [
    ("malware", "drop", "encrypted", "payload", "execute", "binary"),
    ("actor", "inject", "malicious", "process", "spawn", "thread"),
    ("implant", "collect", "stolen", "credential", "exfiltrate", "archive"),
    ("loader", "decode", "obfuscated", "script", "launch", "macro"),
    ("backdoor", "open", "remote", "shell", "await", "command"),
    ("keylogger", "record", "typed", "keystroke", "upload", "log"),
    ("worm", "copy", "hidden", "share", "infect", "folder"),
    ("rootkit", "hook", "kernel", "driver", "hide", "handle"),
    ("trojan", "fetch", "staged", "module", "apply", "patch"),
    ("botnet", "send", "periodic", "beacon", "receive", "task"),
    ("stealer", "parse", "cached", "cookie", "harvest", "wallet"),
    ("ransomware", "encrypt", "target", "document", "demand", "ransom"),
    ("dropper", "write", "staging", "artifact", "verify", "signature"),
    ("spyware", "watch", "active", "window", "capture", "frame"),
    ("miner", "consume", "spare", "cycle", "compute", "digest"),
    ("wiper", "erase", "master", "sector", "corrupt", "table"),
    ("phisher", "craft", "urgent", "message", "lure", "recipient"),
    ("sniffer", "observe", "cleartext", "packet", "extract", "token"),
    ("bruteforcer", "guess", "weak", "password", "attempt", "login"),
    ("downloader", "request", "secondary", "stage", "resolve", "mirror"),
    ("injector", "allocate", "writable", "page", "overwrite", "entry"),
    ("persistence", "register", "scheduled", "job", "survive", "reboot"),
    ("recon", "enumerate", "local", "account", "query", "domain"),
    ("tunneler", "wrap", "covert", "channel", "relay", "session"),
]


def toy_sentences(n: int, seed: int = 5, planted_rate: float = 0.25) -> list[Sentence]:
    """Topic-templated sentences with a planted near-synonym pair: 'ip' and
    'network' interchangeably fill the same slot of the scanner template (and
    occasionally co-occur), so a working word2vec must place them close while
    all other word pairs keep distinct contexts."""
    rng = random.Random(seed)
    out: list[Sentence] = []
    for k in range(n):
        roll = rng.random()
        if roll < planted_rate:
            planted = rng.choice(["ip", "network"])
            words = ["scanner", "probe", planted, "address", "report", "range"]
        elif roll < planted_rate + 0.05:
            words = ["scanner", "probe", "ip", "network", "address", "range"]
        else:
            subj, verb1, adj, noun1, verb2, noun2 = rng.choice(_TOPIC_WORDS)
            words = [subj, verb1, adj, noun1, verb2, noun2]
        out.append(Sentence(doc_id=f"doc{k // 10:04d}", sent_id=k % 10, words=tuple(words)))
    return out


@pytest.fixture(scope="session")
def tiny_config() -> PipelineConfig:
    return PipelineConfig(
        layers=2,
        hidden=64,
        heads=2,
        bpe_vocab=400,
        max_len=64,
        epochs_mlm=2,
        batch_size=32,
        lr_mlm=5e-4,
        emb_dim=32,
        epochs_emb=40,
        window=3,
        negatives=4,
        min_word_freq=3,
        seed=11,
    )


@pytest.fixture(scope="session")
def toy_corpus() -> list[Sentence]:
    return toy_sentences(1000, seed=5)


@pytest.fixture(scope="session")
def trained(toy_corpus, tiny_config, tmp_path_factory):
    """(artifact dir, TrainResult) for the tiny model, trained once."""
    out_dir = tmp_path_factory.mktemp("artifact")
    result = train_tokenizer_and_mlm(toy_corpus, tiny_config, out_dir)
    return out_dir, result
