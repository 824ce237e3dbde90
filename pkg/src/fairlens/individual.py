"""Per-pair similarity-gap audits over image/bilingual-caption triples.

For an image vector v and caption vectors t_a, t_b in two languages, the audit
measures the gap |cos(v,t_a) - cos(v,t_b)|, the caption distance |t_a - t_b|,
and their ratio. The empirical alpha of a dataset is the largest observed
ratio. Two closed-form ceilings accompany every pair:

* exact bound   sqrt(2 * (1 - cos(angle(t_a, t_b)))) -- holds for every image
  vector, no hypothesis needed;
* approx bound  |t_a - t_b| / |t_a| -- a first-order approximation of the
  exact bound, trustworthy only while the relative distance is small. Audits
  count a qualified violation when the relative distance is at most
  APPROX_BOUND_CUTOFF yet the gap exceeds APPROX_BOUND_SLACK times the bound
  (the slack covers the worst-case curvature of the approximation, which is
  below 1.0013 at cutoff 0.1).

The related ball form sqrt(2 * (1 - sqrt(1 - (radius/|t|)^2))) caps the gap
for any caption inside a ball of the given radius around t, radius < |t|.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateShuffleError,
    DimensionError,
    DomainError,
    EmptyCohortError,
    MissingLanguageError,
)
from .vectors import Vector, cosine_similarity, euclidean_distance

__all__ = [
    "GroundedTriple",
    "PairAudit",
    "IndividualFairnessReport",
    "angle_gap_bound",
    "ball_gap_bound",
    "approx_gap_bound",
    "audit_pair",
    "run_individual_audit",
    "shuffled_audit",
]

# Pairs whose caption distance falls below this are SKIPPED: the ratio would
# be 0/0 or blow up on coincident captions.
DISTANCE_SKIP_THRESHOLD = 1e-12

# Additive tolerance absorbing float rounding in bound-violation counters.
BOUND_TOLERANCE = 1e-9

# Applicability window and slack for the first-order approximate bound.
APPROX_BOUND_CUTOFF = 0.1
APPROX_BOUND_SLACK = 1.01


@dataclass(frozen=True)
class GroundedTriple:
    """One image grounded by semantically matching captions in >= 2 languages."""

    image_id: str
    image_vec: Vector
    text_vec_by_lang: Mapping[str, Vector]
    portion_tag: str = ""

    def __post_init__(self) -> None:
        langs = list(self.text_vec_by_lang)
        if len(langs) < 2:
            raise MissingLanguageError(
                f"triple {self.image_id!r} needs captions in at least 2 languages"
            )
        if len(set(langs)) != len(langs):
            raise MissingLanguageError(f"triple {self.image_id!r} has duplicate language tags")
        dims = {self.image_vec.dim} | {v.dim for v in self.text_vec_by_lang.values()}
        if len(dims) != 1:
            raise DimensionError(f"triple {self.image_id!r} mixes dimensions {sorted(dims)}")


@dataclass(frozen=True)
class PairAudit:
    """Audit of one (image, language pair): gap, distance, ratio, and bounds.

    ``ratio`` is None when the pair was skipped (captions closer than
    DISTANCE_SKIP_THRESHOLD).
    """

    image_id: str
    lang_a: str
    lang_b: str
    sim_gap: float
    text_distance: float
    ratio: float | None
    exact_bound: float
    approx_bound: float

    @property
    def skipped(self) -> bool:
        return self.ratio is None


@dataclass(frozen=True)
class IndividualFairnessReport:
    """Aggregate of pair audits: empirical alpha plus violation counters.

    ``alpha_empirical`` is the maximum finite ratio (None when every pair was
    skipped); p95/p99 ratio quantiles are carried alongside for robustness but
    alpha itself is the max.
    """

    audits: tuple[PairAudit, ...]
    lang_a: str
    lang_b: str
    alpha_empirical: float | None
    ratio_p95: float | None
    ratio_p99: float | None
    mean_text_distance: float
    skipped_count: int
    exact_bound_violations: int
    approx_bound_violations: int
    shuffled: bool = False
    shuffle_seed: int | None = None
    alpha_definition: str = field(default="max_ratio")


def angle_gap_bound(cos_angle: float) -> float:
    """Largest similarity gap two vectors at the given mutual cosine can induce.

    sqrt(2 * (1 - cos_angle)); the inner term is clamped at 0 so rounding
    noise on identical vectors cannot produce a NaN.
    """
    if not -1.0 <= cos_angle <= 1.0:
        raise DomainError(f"cos_angle must lie in [-1, 1], got {cos_angle}")
    return math.sqrt(max(0.0, 2.0 * (1.0 - cos_angle)))


def ball_gap_bound(radius: float, center_norm: float) -> float:
    """Gap ceiling over all captions within ``radius`` of a caption of norm ``center_norm``.

    Defined for 0 <= radius < center_norm; sqrt(2 * (1 - sqrt(1 - r^2)))
    with r = radius / center_norm. Monotone increasing in the radius and
    tending to sqrt(2) as radius approaches the norm.
    """
    if radius < 0.0:
        raise DomainError(f"radius must be non-negative, got {radius}")
    if not center_norm > 0.0:
        raise DomainError(f"center norm must be positive, got {center_norm}")
    if radius >= center_norm:
        raise DomainError(
            f"bound undefined for radius >= center norm ({radius} >= {center_norm})"
        )
    r = radius / center_norm
    # 1 - sqrt(1 - r^2) rewritten as r^2 / (1 + sqrt(1 - r^2)): same value,
    # no cancellation for tiny r (the naive form collapses to 0 below r ~ 1e-8)
    return r * math.sqrt(2.0 / (1.0 + math.sqrt(1.0 - r * r)))


def approx_gap_bound(distance: float, ref_norm: float) -> float:
    """First-order gap bound distance / ref_norm (reference caption's norm)."""
    if distance < 0.0:
        raise DomainError(f"distance must be non-negative, got {distance}")
    if not ref_norm > 0.0:
        raise DomainError(f"reference norm must be positive, got {ref_norm}")
    return distance / ref_norm


def audit_pair(triple: GroundedTriple, lang_a: str, lang_b: str) -> PairAudit:
    """Audit one triple for the given language pair.

    The approximate bound uses lang_a's caption norm as the reference.
    """
    try:
        t_a = triple.text_vec_by_lang[lang_a]
    except KeyError:
        raise MissingLanguageError(
            f"triple {triple.image_id!r} has no caption for language {lang_a!r}"
        ) from None
    try:
        t_b = triple.text_vec_by_lang[lang_b]
    except KeyError:
        raise MissingLanguageError(
            f"triple {triple.image_id!r} has no caption for language {lang_b!r}"
        ) from None

    v = triple.image_vec
    sim_gap = abs(cosine_similarity(v, t_a) - cosine_similarity(v, t_b))
    text_distance = euclidean_distance(t_a, t_b)
    ratio = sim_gap / text_distance if text_distance >= DISTANCE_SKIP_THRESHOLD else None
    exact_bound = angle_gap_bound(cosine_similarity(t_a, t_b))
    approx_bound = approx_gap_bound(text_distance, t_a.norm)
    return PairAudit(
        image_id=triple.image_id,
        lang_a=lang_a,
        lang_b=lang_b,
        sim_gap=sim_gap,
        text_distance=text_distance,
        ratio=ratio,
        exact_bound=exact_bound,
        approx_bound=approx_bound,
    )


def _aggregate(
    audits: Sequence[PairAudit],
    lang_a: str,
    lang_b: str,
    shuffled: bool = False,
    shuffle_seed: int | None = None,
) -> IndividualFairnessReport:
    ratios = [a.ratio for a in audits if a.ratio is not None]
    exact_violations = sum(
        1 for a in audits if a.sim_gap > a.exact_bound + BOUND_TOLERANCE
    )
    approx_violations = sum(
        1
        for a in audits
        if a.approx_bound <= APPROX_BOUND_CUTOFF
        and a.sim_gap > APPROX_BOUND_SLACK * a.approx_bound + BOUND_TOLERANCE
    )
    return IndividualFairnessReport(
        audits=tuple(audits),
        lang_a=lang_a,
        lang_b=lang_b,
        alpha_empirical=max(ratios) if ratios else None,
        ratio_p95=float(np.percentile(ratios, 95)) if ratios else None,
        ratio_p99=float(np.percentile(ratios, 99)) if ratios else None,
        mean_text_distance=float(np.mean([a.text_distance for a in audits])),
        skipped_count=sum(1 for a in audits if a.skipped),
        exact_bound_violations=exact_violations,
        approx_bound_violations=approx_violations,
        shuffled=shuffled,
        shuffle_seed=shuffle_seed,
    )


def _audit_indexed(args: tuple[int, GroundedTriple, str, str]) -> PairAudit:
    idx, triple, lang_a, lang_b = args
    try:
        return audit_pair(triple, lang_a, lang_b)
    except (MissingLanguageError, DimensionError) as exc:
        raise type(exc)(f"triple {idx}: {exc}") from exc


def run_individual_audit(
    triples: Sequence[GroundedTriple],
    lang_a: str,
    lang_b: str,
    workers: int | None = None,
) -> IndividualFairnessReport:
    """Audit every triple and aggregate; output order equals input order.

    ``workers`` > 1 fans the per-pair audits across a thread pool; the
    aggregation (max / sum / mean) is order-independent so the report is
    identical regardless of worker count.
    """
    if len(triples) == 0:
        raise EmptyCohortError("no triples to audit")
    jobs = [(i, t, lang_a, lang_b) for i, t in enumerate(triples)]
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            audits = list(pool.map(_audit_indexed, jobs))
    else:
        audits = [_audit_indexed(job) for job in jobs]
    return _aggregate(audits, lang_a, lang_b)


def _fisher_yates(n: int, seed: int) -> np.ndarray:
    """Seeded permutation of range(n): PCG64(seed) driving a descending Fisher-Yates pass."""
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def shuffled_audit(
    triples: Sequence[GroundedTriple],
    lang_a: str,
    lang_b: str,
    seed: int,
    workers: int | None = None,
) -> IndividualFairnessReport:
    """Audit with images permuted across triples (dissimilar-pairing variant).

    The permutation is drawn by PCG64(seed) + Fisher-Yates, so reports are
    byte-reproducible across runs and platforms. Identity permutations are
    allowed (a derangement is not required). Each image id travels with its
    vector so audit rows stay traceable.
    """
    if len(triples) < 2:
        raise DegenerateShuffleError("shuffled audit needs at least 2 triples")
    perm = _fisher_yates(len(triples), seed)
    permuted = [
        replace(t, image_id=triples[src].image_id, image_vec=triples[src].image_vec)
        for t, src in zip(triples, perm)
    ]
    report = run_individual_audit(permuted, lang_a, lang_b, workers=workers)
    return replace(report, shuffled=True, shuffle_seed=seed)
