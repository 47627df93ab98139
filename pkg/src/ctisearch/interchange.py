"""On-disk interchange formats between the model pipeline and the search core.

Three line-oriented formats, documented in the README:

* attention records — newline-delimited JSON, one object per line:
  ``{"doc_id": ..., "sent_id": ..., "words": [...], "attention": [[...]]}``
* word embeddings — TSV: ``word<TAB>v1 v2 ... vd`` (space-separated decimals)
* document metadata — newline-delimited JSON keyed by ``doc_id``

Readers stream and validate; writers emit floats with ``repr`` so a
write/read cycle reproduces values bit-exactly.  A top-level ``"version"``
key in JSON records is accepted and ignored.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import (
    DuplicateEntryError,
    MalformedLineError,
    MissingWordError,
    StructuralError,
    ValueRangeError,
)

__all__ = [
    "AttentionRecord",
    "EmbeddingTable",
    "DocMeta",
    "read_attention_file",
    "write_attention_file",
    "read_embeddings",
    "write_embeddings",
    "read_doc_meta",
    "write_doc_meta",
    "read_fingerprint_sidecar",
    "sidecar_path",
]


@dataclass
class AttentionRecord:
    """One sentence: its (already lowercased, subword-merged) words and the
    word-level attention matrix."""

    doc_id: str
    sent_id: int
    words: tuple[str, ...]
    attention: np.ndarray  # square, side == len(words), values in [0, 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionRecord):
            return NotImplemented
        return (
            self.doc_id == other.doc_id
            and self.sent_id == other.sent_id
            and self.words == other.words
            and np.array_equal(self.attention, other.attention)
        )

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sent_id)


@dataclass
class DocMeta:
    """Per-document metadata; ``actor`` drives attack-origin attribution."""

    doc_id: str
    vendor: str | None = None
    actor: str | None = None
    date: str | None = None  # ISO-8601 date
    url: str | None = None


class EmbeddingTable:
    """word -> fixed-dimension vector table with cached derived views.

    Vectors are kept as rows of a float64 matrix.  Unit-normalized rows (for
    the cosine distance) and per-dimension min/max statistics (for the
    scaled-Euclidean alternative) are computed lazily and cached.
    """

    def __init__(self, entries: Mapping[str, Iterable[float]]):
        if not entries:
            raise ValueError("embedding table must not be empty")
        self.words: tuple[str, ...] = tuple(entries.keys())
        matrix = np.asarray([list(entries[w]) for w in self.words], dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("embedding vectors must all have the same length")
        self.dimension: int = int(matrix.shape[1])
        if self.dimension < 1:
            raise ValueError("embedding dimension must be positive")
        if not np.isfinite(matrix).all():
            raise ValueError("embedding vectors must be finite")
        norms = np.linalg.norm(matrix, axis=1)
        if (norms == 0.0).any():
            bad = self.words[int(np.argmax(norms == 0.0))]
            raise ValueError(f"zero vector for word {bad!r}")
        self.matrix: np.ndarray = matrix
        self._row: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self._row) != len(self.words):
            raise ValueError("duplicate words in embedding table")
        self._unit: np.ndarray | None = None
        self._minmax: tuple[np.ndarray, np.ndarray] | None = None
        self._digest: str | None = None

    def __contains__(self, word: str) -> bool:
        return word in self._row

    def __len__(self) -> int:
        return len(self.words)

    def row(self, word: str) -> int:
        try:
            return self._row[word]
        except KeyError:
            raise MissingWordError(word) from None

    def vector(self, word: str) -> np.ndarray:
        return self.matrix[self.row(word)]

    @property
    def unit_rows(self) -> np.ndarray:
        """Rows scaled to unit L2 norm."""
        if self._unit is None:
            norms = np.linalg.norm(self.matrix, axis=1, keepdims=True)
            self._unit = self.matrix / norms
        return self._unit

    @property
    def minmax_stats(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-dimension (min, span) over the whole table; span 0 -> 1."""
        if self._minmax is None:
            lo = self.matrix.min(axis=0)
            span = self.matrix.max(axis=0) - lo
            span[span == 0.0] = 1.0
            self._minmax = (lo, span)
        return self._minmax

    def content_digest(self) -> str:
        """sha256 over the canonical TSV serialization of this table.

        Used in index fingerprints so that the same vectors always hash the
        same regardless of the formatting of the file they came from.
        """
        if self._digest is None:
            h = hashlib.sha256()
            for word in self.words:
                row = self.matrix[self._row[word]]
                h.update(_embedding_line(word, row).encode("utf-8"))
            self._digest = h.hexdigest()
        return self._digest

    def entries(self) -> Iterator[tuple[str, np.ndarray]]:
        for word in self.words:
            yield word, self.matrix[self._row[word]]


# ---------------------------------------------------------------------------
# attention records (JSON lines)


def _record_from_obj(obj: object, path: str, line_no: int) -> AttentionRecord:
    if not isinstance(obj, dict):
        raise MalformedLineError("record is not a JSON object", path=path, line=line_no)
    try:
        doc_id = obj["doc_id"]
        sent_id = obj["sent_id"]
        words = obj["words"]
        attention = obj["attention"]
    except KeyError as exc:
        raise MalformedLineError(f"missing field {exc.args[0]!r}", path=path, line=line_no) from None
    if not isinstance(doc_id, str) or not doc_id:
        raise MalformedLineError("doc_id must be a non-empty string", path=path, line=line_no)
    if not isinstance(sent_id, int) or isinstance(sent_id, bool) or sent_id < 0:
        raise MalformedLineError("sent_id must be a non-negative integer", path=path, line=line_no)
    if not isinstance(words, list) or not words:
        raise MalformedLineError("words must be a non-empty list", path=path, line=line_no)
    for w in words:
        if not isinstance(w, str) or not w:
            raise MalformedLineError("words must be non-empty strings", path=path, line=line_no)
        if w != w.lower():
            raise MalformedLineError(f"word {w!r} is not lowercase", path=path, line=line_no)
    n = len(words)
    try:
        matrix = np.asarray(attention, dtype=np.float64)
    except (TypeError, ValueError):
        raise StructuralError("attention is not a rectangular numeric matrix", path=path, line=line_no) from None
    if matrix.ndim != 2 or matrix.shape != (n, n):
        raise StructuralError(
            f"attention must be {n}x{n}, got shape {'x'.join(map(str, matrix.shape))}",
            path=path,
            line=line_no,
        )
    if not np.isfinite(matrix).all():
        raise ValueRangeError("attention contains non-finite values", path=path, line=line_no)
    if (matrix < 0.0).any() or (matrix > 1.0).any():
        raise ValueRangeError("attention values must lie in [0, 1]", path=path, line=line_no)
    return AttentionRecord(doc_id=doc_id, sent_id=sent_id, words=tuple(words), attention=matrix)


def record_from_payload(obj: object) -> AttentionRecord:
    """Validate an in-memory record payload (e.g. a service request body) with
    the same rules as the file reader."""
    return _record_from_obj(obj, path="<payload>", line_no=0)


def read_attention_file(path: str | Path) -> Iterator[AttentionRecord]:
    """Stream `AttentionRecord`s from a JSON-lines file, validating each.

    Holds one record at a time (plus the set of ids seen, to enforce
    uniqueness of ``(doc_id, sent_id)`` within the file).
    """
    path = str(path)
    seen: set[tuple[str, int]] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(f"invalid JSON: {exc.msg}", path=path, line=line_no) from None
            record = _record_from_obj(obj, path, line_no)
            if record.key in seen:
                raise DuplicateEntryError(
                    f"duplicate (doc_id, sent_id) = {record.key!r}", path=path, line=line_no
                )
            seen.add(record.key)
            yield record


def _attention_line(record: AttentionRecord) -> str:
    obj = {
        "doc_id": record.doc_id,
        "sent_id": record.sent_id,
        "words": list(record.words),
        "attention": [[float(v) for v in row] for row in record.attention],
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def write_attention_file(records: Iterable[AttentionRecord], path: str | Path) -> int:
    """Write records as JSON lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(_attention_line(record))
            fh.write("\n")
            count += 1
    return count


# ---------------------------------------------------------------------------
# embeddings (TSV)


def _embedding_line(word: str, row: np.ndarray) -> str:
    return word + "\t" + " ".join(repr(float(v)) for v in row) + "\n"


def read_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a TSV embedding table; the dimension is inferred from the first row."""
    path = str(path)
    entries: dict[str, list[float]] = {}
    dimension: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            word, sep, rest = line.rstrip("\n").partition("\t")
            if not sep or not word:
                raise MalformedLineError("expected 'word<TAB>v1 v2 ...'", path=path, line=line_no)
            if word in entries:
                raise DuplicateEntryError(f"duplicate word {word!r}", path=path, line=line_no)
            try:
                values = [float(tok) for tok in rest.split()]
            except ValueError:
                raise MalformedLineError(
                    f"non-numeric component for word {word!r}", path=path, line=line_no
                ) from None
            if not values:
                raise MalformedLineError(f"empty vector for word {word!r}", path=path, line=line_no)
            if dimension is None:
                dimension = len(values)
            elif len(values) != dimension:
                raise StructuralError(
                    f"word {word!r} has dimension {len(values)}, expected {dimension}",
                    path=path,
                    line=line_no,
                )
            if not all(math.isfinite(v) for v in values):
                raise ValueRangeError(f"non-finite component for word {word!r}", path=path, line=line_no)
            if all(v == 0.0 for v in values):
                raise ValueRangeError(f"zero vector for word {word!r}", path=path, line=line_no)
            entries[word] = values
    if not entries:
        raise StructuralError("embedding file is empty", path=path)
    return EmbeddingTable(entries)


def write_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word, row in table.entries():
            fh.write(_embedding_line(word, row))


# ---------------------------------------------------------------------------
# document metadata (JSON lines)


def read_doc_meta(path: str | Path) -> dict[str, DocMeta]:
    path = str(path)
    out: dict[str, DocMeta] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(f"invalid JSON: {exc.msg}", path=path, line=line_no) from None
            if not isinstance(obj, dict):
                raise MalformedLineError("record is not a JSON object", path=path, line=line_no)
            doc_id = obj.get("doc_id")
            if not isinstance(doc_id, str) or not doc_id:
                raise MalformedLineError("doc_id must be a non-empty string", path=path, line=line_no)
            if doc_id in out:
                raise DuplicateEntryError(f"duplicate doc_id {doc_id!r}", path=path, line=line_no)
            meta = DocMeta(doc_id=doc_id)
            for key in ("vendor", "actor", "date", "url"):
                value = obj.get(key)
                if value is None:
                    continue
                if not isinstance(value, str):
                    raise MalformedLineError(f"{key} must be a string", path=path, line=line_no)
                if key == "date":
                    try:
                        date.fromisoformat(value)
                    except ValueError:
                        raise MalformedLineError(
                            f"date {value!r} is not ISO-8601", path=path, line=line_no
                        ) from None
                setattr(meta, key, value)
            out[doc_id] = meta
    return out


def write_doc_meta(metas: Iterable[DocMeta], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for meta in metas:
            obj: dict[str, object] = {"doc_id": meta.doc_id}
            for key in ("vendor", "actor", "date", "url"):
                value = getattr(meta, key)
                if value is not None:
                    obj[key] = value
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


# ---------------------------------------------------------------------------
# pipeline fingerprint sidecars

# The model pipeline writes `<artifact>.fingerprint.json` next to each file it
# exports; index builds refuse inputs whose sidecar fingerprints disagree.


def sidecar_path(artifact: str | Path) -> Path:
    return Path(str(artifact) + ".fingerprint.json")


def read_fingerprint_sidecar(artifact: str | Path) -> str | None:
    """Return the pipeline config fingerprint for an artifact, if one exists."""
    side = sidecar_path(artifact)
    if not side.exists():
        return None
    try:
        obj = json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedLineError(f"invalid JSON: {exc.msg}", path=str(side)) from None
    value = obj.get("config_fingerprint") if isinstance(obj, dict) else None
    if not isinstance(value, str):
        raise MalformedLineError("missing 'config_fingerprint'", path=str(side))
    return value
