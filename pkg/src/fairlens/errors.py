"""Exception types shared across the audit engine.

Every error raised by fairlens derives from FairlensError so callers (CLI,
service) can map the whole family to one failure mode. Ingestion errors carry
enough location information (line number, record id) to pinpoint the offending
input.
"""

from __future__ import annotations


class FairlensError(Exception):
    """Base class for all fairlens errors."""


class DimensionError(FairlensError):
    """Vectors with incompatible dimensions were combined."""


class InvalidVectorError(FairlensError):
    """A vector violates construction invariants (empty, non-finite, or zero norm)."""

    def __init__(self, message: str, record_id: str | None = None, line: int | None = None):
        super().__init__(message)
        self.record_id = record_id
        self.line = line


class EmptyCandidateError(FairlensError):
    """argmax was asked to choose from an empty candidate list."""


class MissingLanguageError(FairlensError):
    """A requested language is absent from a grounded pair."""


class DomainError(FairlensError):
    """A closed-form bound was evaluated outside its hypothesis."""


class DegenerateShuffleError(FairlensError):
    """A shuffled audit needs at least two items to permute."""


class EmptyCohortError(FairlensError):
    """An accuracy was requested over a cohort with no records."""


class TaxonomyError(FairlensError):
    """A group label or dimension is not part of the declared taxonomy."""


class PartitionError(FairlensError):
    """Two groups were expected to partition a cohort but do not."""


class ParseError(FairlensError):
    """A structured input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DuplicateIdError(FairlensError):
    """An id appeared more than once in one file."""

    def __init__(self, record_id: str, line: int | None = None):
        msg = f"duplicate id {record_id!r}"
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.record_id = record_id
        self.line = line


class DanglingReferenceError(FairlensError):
    """A manifest references an id that does not resolve in the embedding store."""

    def __init__(self, record_id: str, context: str = ""):
        detail = f"unresolved id {record_id!r}"
        super().__init__(f"{detail} ({context})" if context else detail)
        self.record_id = record_id


class ManifestError(FairlensError):
    """A manifest is structurally invalid or inconsistent with its data."""


class PromptSpecError(FairlensError):
    """A prompt spec is incomplete or a prompt embedding is missing."""


class PivotError(FairlensError):
    """The requested pivot language is not present in a report."""


class EmbeddingFileError(FairlensError):
    """Aggregate of every validation error found in one embedding file.

    Loading is total: the whole file is scanned and all problems are reported
    together instead of stopping at the first one.
    """

    def __init__(self, errors: list[FairlensError]):
        self.errors = list(errors)
        lines = "\n".join(f"  - {e}" for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")
