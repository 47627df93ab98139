"""Corpus normalization: IoC placeholders, sentence splitting, lemmatization.

IoC artifacts (URLs, IPs, file hashes, CVE ids, registry keys, file paths)
are replaced by placeholder tokens before tokenization so one artifact never
explodes into many meaningless subwords, and so exact artifact values never
leak into the trained model.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .config import PipelineConfig, write_sidecar

logger = logging.getLogger(__name__)

__all__ = [
    "Sentence",
    "replace_iocs",
    "split_sentences",
    "lemmatize",
    "tokenize",
    "normalize_text",
    "normalize_corpus",
    "read_corpus_file",
    "write_corpus_file",
]

# Replacement order matters: composite artifacts (URLs, registry keys, paths)
# must win over the fragments they contain (IPs, hashes, filenames).
_IOC_PATTERNS: list[tuple[str, re.Pattern]] = [
    ("cve", re.compile(r"\bCVE-\d{4}-\d{4,7}\b", re.IGNORECASE)),
    ("url", re.compile(r"\b(?:https?|ftps?)://[^\s\"'<>]+|\bwww\.[\w.-]+(?:/[^\s\"'<>]*)?", re.IGNORECASE)),
    (
        "registry",
        re.compile(
            r"\b(?:HKEY_(?:LOCAL_MACHINE|CURRENT_USER|CLASSES_ROOT|USERS|CURRENT_CONFIG)"
            r"|HKLM|HKCU|HKCR|HKU|HKCC)(?:\\[^\s\\/:*?\"<>|]+)+",
            re.IGNORECASE,
        ),
    ),
    ("file", re.compile(r"\b[A-Za-z]:\\(?:[^\s\\/:*?\"<>|]+\\)*[^\s\\/:*?\"<>|]+")),
    ("file", re.compile(r"(?<![\w/])/(?:[\w.-]+/)+[\w.-]+")),
    (
        "file",
        re.compile(
            r"\b[\w.-]+\.(?:exe|dll|bat|cmd|ps1|vbs|js|jar|docx?|xlsx?|pptx?|pdf"
            r"|zip|rar|7z|scr|tmp|sys|bin|sh|py|elf|apk|lnk|iso|img|msi|hta)\b",
            re.IGNORECASE,
        ),
    ),
    ("hash", re.compile(r"\b[a-fA-F0-9]{64}\b|\b[a-fA-F0-9]{40}\b|\b[a-fA-F0-9]{32}\b")),
    ("ip", re.compile(r"\b(?:\d{1,3}\.){3}\d{1,3}(?::\d{1,5})?\b")),
]

_PLACEHOLDER_RE = re.compile(r"<(?:url|ip|hash|cve|registry|file)>")
_TOKEN_RE = re.compile(r"<(?:url|ip|hash|cve|registry|file)>|[a-z0-9']+")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

# conservative English suffix rules; anything ambiguous is left untouched
_IRREGULAR = {
    "children": "child",
    "men": "man",
    "women": "woman",
    "processes": "process",
    "viruses": "virus",
    "analyses": "analysis",
}
_VOWELS = set("aeiou")


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    sent_id: int
    words: tuple[str, ...]


def replace_iocs(text: str, placeholders: dict[str, str] | None = None) -> str:
    """Replace every IoC artifact with its placeholder token."""
    mapping = placeholders or {}
    for kind, pattern in _IOC_PATTERNS:
        token = mapping.get(kind, f"<{kind}>")
        text = pattern.sub(token, text)
    return text


def split_sentences(text: str) -> list[str]:
    """Paragraphs split at blank lines, sentences at terminal punctuation."""
    sentences: list[str] = []
    for paragraph in re.split(r"\n\s*\n", text):
        flat = " ".join(paragraph.split())
        if not flat:
            continue
        for part in _SENTENCE_SPLIT_RE.split(flat):
            part = part.strip()
            if part:
                sentences.append(part)
    return sentences


def lemmatize(word: str) -> str:
    """Rule-based lemma: plural and -ed/-ing stripping with doubling repair.

    Deliberately conservative; placeholders, short words and words containing
    digits pass through unchanged.
    """
    if _PLACEHOLDER_RE.fullmatch(word) or len(word) <= 3 or any(c.isdigit() for c in word):
        return word
    if word in _IRREGULAR:
        return _IRREGULAR[word]
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith(("ches", "shes", "sses", "xes", "zes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    for suffix in ("ing", "ed"):
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            stem = word[: -len(suffix)]
            if stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "sl":
                return stem[:-1]  # dropped -> drop
            if stem[-1] not in _VOWELS and stem[-2] in _VOWELS and len(stem) <= 5:
                return stem + "e"  # using -> use, encoded -> encode
            return stem
    return word


def tokenize(sentence: str, lowercase: bool = True, do_lemmatize: bool = True) -> list[str]:
    """Word tokens: lowercase alphanumeric runs plus intact placeholder tokens."""
    if lowercase:
        sentence = sentence.lower()
    words = _TOKEN_RE.findall(sentence)
    if do_lemmatize:
        words = [lemmatize(w) for w in words]
    return words


def normalize_text(text: str, config: PipelineConfig) -> list[list[str]]:
    """Full normalization of one document: IoCs -> placeholders, sentence
    split, tokenize, lemmatize.  Empty sentences are dropped."""
    replaced = replace_iocs(text, config.placeholders)
    out: list[list[str]] = []
    for sentence in split_sentences(replaced):
        words = tokenize(sentence, lowercase=config.lowercase, do_lemmatize=config.lemmatize)
        if words:
            out.append(words)
    return out


def normalize_corpus(
    docs: Iterable[tuple[str, str]], config: PipelineConfig
) -> Iterator[Sentence]:
    """``(doc_id, raw text)`` pairs -> normalized sentences with ids.

    Undecodable/empty documents are skipped with a warning.
    """
    for doc_id, text in docs:
        try:
            sentences = normalize_text(text, config)
        except UnicodeDecodeError as exc:
            logger.warning("skipping %s: %s", doc_id, exc)
            continue
        if not sentences:
            logger.warning("skipping %s: no sentences after normalization", doc_id)
            continue
        for sent_id, words in enumerate(sentences):
            yield Sentence(doc_id=doc_id, sent_id=sent_id, words=tuple(words))


def read_text_dir(directory: str | Path) -> Iterator[tuple[str, str]]:
    """Each ``*.txt`` file is one document; the stem is the doc id."""
    for path in sorted(Path(directory).glob("*.txt")):
        try:
            yield path.stem, path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            logger.warning("skipping %s: %s", path, exc)


def write_corpus_file(sentences: Iterable[Sentence], path: str | Path, config: PipelineConfig) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(
                json.dumps(
                    {"doc_id": s.doc_id, "sent_id": s.sent_id, "words": list(s.words)},
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            count += 1
    write_sidecar(path, config)
    return count


def read_corpus_file(path: str | Path) -> list[Sentence]:
    out: list[Sentence] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            out.append(
                Sentence(
                    doc_id=obj["doc_id"], sent_id=int(obj["sent_id"]), words=tuple(obj["words"])
                )
            )
    return out
