"""Deterministic vector arithmetic underlying every audit metric.

All operations are pure functions over immutable ``Vector`` values and are
safe to call from any number of workers. Accumulation is plain 64-bit (no
compensated summation); at the dimensions used for embedding audits
(<= 4096) rounding error stays far below the 1e-9 tolerances applied
downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, EmptyCandidateError, InvalidVectorError

__all__ = ["Vector", "cosine_similarity", "euclidean_distance", "argmax_similarity"]

# Similarity scores are clamped into [-1, 1] so rounding noise never leaks
# into downstream bound checks.
_SIM_LO = -1.0
_SIM_HI = 1.0


@dataclass(frozen=True, eq=False)
class Vector:
    """An embedding vector: finite 64-bit components, nonzero norm.

    Zero vectors are rejected at construction rather than at use; cosine
    similarity is undefined for them and audited representations are assumed
    nonzero.
    """

    values: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidVectorError("vector must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise InvalidVectorError("vector has non-finite components")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise InvalidVectorError("zero vector rejected (cosine undefined)")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "norm", norm)

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def scaled(self, factor: float) -> "Vector":
        """Return this vector scaled by a positive factor."""
        if not factor > 0.0:
            raise InvalidVectorError("scale factor must be positive")
        return Vector(self.values * factor)

    def __repr__(self) -> str:  # keep reprs short; vectors can be wide
        head = ", ".join(f"{x:.4g}" for x in self.values[:4])
        tail = ", ..." if self.dim > 4 else ""
        return f"Vector(dim={self.dim}, [{head}{tail}])"


def _check_dims(a: Vector, b: Vector) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def cosine_similarity(v: Vector, t: Vector) -> float:
    """Cosine similarity <v,t>/(|v||t|), clamped to [-1, 1].

    Componentwise-identical inputs return exactly 1.0; without the shortcut,
    rounding puts self-similarity a couple of ulps under 1, which the
    sqrt(2(1-cos)) gap bounds would amplify to ~1e-8 where the answer is 0.
    """
    _check_dims(v, t)
    if v.values is t.values or np.array_equal(v.values, t.values):
        return 1.0
    raw = float(v.values @ t.values) / (v.norm * t.norm)
    return min(_SIM_HI, max(_SIM_LO, raw))


def euclidean_distance(a: Vector, b: Vector) -> float:
    """Euclidean distance |a - b|."""
    _check_dims(a, b)
    return float(np.linalg.norm(a.values - b.values))


def argmax_similarity(query: Vector, candidates: Sequence[Vector]) -> int:
    """Index of the candidate with the highest cosine similarity to ``query``.

    Ties break to the smallest index so repeated audits are reproducible.
    """
    if len(candidates) == 0:
        raise EmptyCandidateError("argmax over empty candidate list")
    best_idx = 0
    best_score = -np.inf
    for idx, cand in enumerate(candidates):
        score = cosine_similarity(query, cand)
        if score > best_score:
            best_score = score
            best_idx = idx
    return best_idx
