"""Exception types shared across the package."""

from __future__ import annotations


class CtiSearchError(Exception):
    """Base class for all errors raised by this package."""


class InterchangeError(CtiSearchError):
    """A file in one of the interchange formats failed validation.

    ``path`` and ``line`` locate the offending input (line numbers are
    1-based; ``line`` is None for whole-file problems).
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = path
            if line is not None:
                prefix += f":{line}"
            prefix += ": "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class MalformedLineError(InterchangeError):
    """A line is not valid JSON / TSV or is missing required fields."""


class StructuralError(InterchangeError):
    """A record violates a shape invariant (e.g. non-square attention)."""


class ValueRangeError(InterchangeError):
    """A numeric field is outside its allowed range or non-finite."""


class DuplicateEntryError(InterchangeError):
    """A key that must be unique within a file appeared twice."""


class MissingWordError(CtiSearchError, KeyError):
    """A word was looked up that the embedding table does not contain."""

    def __init__(self, word: str):
        self.word = word
        super().__init__(f"word not in embedding table: {word!r}")

    def __str__(self) -> str:  # KeyError quotes its arg; keep the message readable
        return self.args[0]


class GraphSizeError(CtiSearchError):
    """A graph exceeds the size limit of an exact (exponential) algorithm."""


class StaleIndexError(CtiSearchError):
    """Query-time parameters do not match the parameters the index was built with."""


class EmptyAttributionError(CtiSearchError):
    """Attribution was requested but no indexed document carries an actor label."""


class CaseConstructionError(CtiSearchError):
    """A behavior evaluation case could not be constructed."""
