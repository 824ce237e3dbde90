"""Cross-lingual accuracy gaps and protected-group rate disparities.

Metrics over an ``OutcomeSet`` of per-(item, language) matching outcomes:

* accuracy(L)            fraction correct within language L
* gap(L, L')             |acc(L) - acc(L')|
* disp(L, a, b)          |acc_a(L) - acc_b(L)| for two group cohorts, or
                         UNDEFINED (None) when a cohort is empty -- a silent
                         zero would fake parity
* decomposition_check    for a binary partition {a, b}:
                         |acc_a(L) - acc_b(L')| <= gap(L,L')
                         + p_b(L) * disp(L)(a,b) + p_a(L') * disp(L')(a,b)

The decomposition inequality is exact (it follows from the mixture identity
acc = p_a * acc_a + p_b * acc_b and the triangle inequality); a failed check
means corrupted inputs, not an unlucky sample.

OutcomeSet stores records columnar (numpy masks per label) so audits over
millions of records stay cheap; ``from_cohorts`` builds the same structure
straight from per-cohort counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyCohortError, ManifestError, PartitionError, TaxonomyError

__all__ = [
    "GroupLabel",
    "OutcomeRecord",
    "OutcomeSet",
    "Cohort",
    "DecompositionCheck",
    "GroupFairnessReport",
    "accuracy",
    "group_accuracy",
    "gap",
    "disp",
    "decomposition_check",
    "run_group_audit",
    "age_bucket",
    "AGE_BUCKET_LABELS",
]

# Tolerance absorbing float rounding when checking the exact decomposition
# inequality.
DECOMPOSITION_TOLERANCE = 1e-9

# Age buckets, boundary ages assigned to the lower-listed bucket (age 2 is an
# infant, age 3 opens the next bucket).
AGE_BUCKET_LABELS = ("0-2", "3-19", "20-49", "50-69", "70+")
_AGE_BUCKET_UPPER = (2, 19, 49, 69)


def age_bucket(age: float) -> str:
    """Map a numeric age to its bucket label."""
    if age < 0:
        raise TaxonomyError(f"age must be non-negative, got {age}")
    for upper, label in zip(_AGE_BUCKET_UPPER, AGE_BUCKET_LABELS):
        if age <= upper:
            return label
    return AGE_BUCKET_LABELS[-1]


@dataclass(frozen=True)
class GroupLabel:
    """One protected-group label, e.g. ("gender", "female")."""

    dimension: str
    value: str

    def __post_init__(self) -> None:
        if not self.dimension or not self.value:
            raise TaxonomyError("group dimension and value must be non-empty")

    def __str__(self) -> str:
        return f"{self.dimension}={self.value}"


@dataclass(frozen=True)
class OutcomeRecord:
    """One matching outcome for (item, language)."""

    item_id: str
    lang: str
    groups: frozenset[GroupLabel]
    correct: bool


Cohort = tuple[str, Iterable[GroupLabel], int, int]
"""(language, group labels, cohort size, number correct) for ``OutcomeSet.from_cohorts``."""


def _as_labels(groups) -> tuple[GroupLabel, ...]:
    if isinstance(groups, GroupLabel):
        return (groups,)
    return tuple(groups)


class OutcomeSet:
    """Immutable set of matching outcomes with a declared group taxonomy.

    Records are stored columnar: one boolean membership mask per group label,
    one correctness array, one language code array. Item ids may be implicit
    (generated "r0", "r1", ... when built from cohort counts); they only
    matter for traceability, never for the metrics.
    """

    def __init__(
        self,
        records: Iterable[OutcomeRecord],
        taxonomy: Mapping[str, Sequence[str]] | None = None,
    ):
        records = tuple(records)
        langs: list[str] = []
        lang_index: dict[str, int] = {}
        seen_ids: set[tuple[str, str]] = set()
        lang_codes = np.empty(len(records), dtype=np.int32)
        correct = np.empty(len(records), dtype=bool)
        label_rows: dict[GroupLabel, list[int]] = {}
        for i, rec in enumerate(records):
            key = (rec.lang, rec.item_id)
            if key in seen_ids:
                raise ManifestError(
                    f"duplicate item id {rec.item_id!r} in language {rec.lang!r}"
                )
            seen_ids.add(key)
            if rec.lang not in lang_index:
                lang_index[rec.lang] = len(langs)
                langs.append(rec.lang)
            lang_codes[i] = lang_index[rec.lang]
            correct[i] = rec.correct
            for label in rec.groups:
                label_rows.setdefault(label, []).append(i)
        masks = {}
        for label, rows in label_rows.items():
            mask = np.zeros(len(records), dtype=bool)
            mask[rows] = True
            masks[label] = mask
        self._init_columnar(
            langs=tuple(langs),
            lang_codes=lang_codes,
            correct=correct,
            masks=masks,
            taxonomy=taxonomy,
            item_ids=tuple(r.item_id for r in records),
        )

    @classmethod
    def from_cohorts(
        cls,
        cohorts: Iterable[Cohort],
        taxonomy: Mapping[str, Sequence[str]] | None = None,
    ) -> "OutcomeSet":
        """Build an OutcomeSet from per-cohort counts.

        Equivalent to expanding each cohort into ``size`` records of which
        ``n_correct`` are correct (record order inside a cohort is irrelevant
        to every metric). Item ids are implicit.
        """
        cohorts = list(cohorts)
        total = 0
        for _, _, size, n_correct in cohorts:
            if size < 0 or not 0 <= n_correct <= size:
                raise ManifestError(f"invalid cohort counts: size={size}, correct={n_correct}")
            total += size
        langs: list[str] = []
        lang_index: dict[str, int] = {}
        lang_codes = np.empty(total, dtype=np.int32)
        correct = np.zeros(total, dtype=bool)
        label_spans: dict[GroupLabel, list[tuple[int, int]]] = {}
        offset = 0
        for lang, labels, size, n_correct in cohorts:
            if lang not in lang_index:
                lang_index[lang] = len(langs)
                langs.append(lang)
            lang_codes[offset : offset + size] = lang_index[lang]
            correct[offset : offset + n_correct] = True
            for label in _as_labels(labels):
                label_spans.setdefault(label, []).append((offset, offset + size))
            offset += size
        masks = {}
        for label, spans in label_spans.items():
            mask = np.zeros(total, dtype=bool)
            for lo, hi in spans:
                mask[lo:hi] = True
            masks[label] = mask
        obj = cls.__new__(cls)
        obj._init_columnar(
            langs=tuple(langs),
            lang_codes=lang_codes,
            correct=correct,
            masks=masks,
            taxonomy=taxonomy,
            item_ids=None,
        )
        return obj

    def _init_columnar(self, langs, lang_codes, correct, masks, taxonomy, item_ids) -> None:
        if taxonomy is not None:
            taxonomy = {dim: tuple(values) for dim, values in taxonomy.items()}
            declared = {
                GroupLabel(dim, value) for dim, values in taxonomy.items() for value in values
            }
            unknown = sorted(str(lbl) for lbl in masks if lbl not in declared)
            if unknown:
                raise TaxonomyError(f"labels outside declared taxonomy: {', '.join(unknown)}")
        else:
            derived: dict[str, list[str]] = {}
            for label in masks:
                values = derived.setdefault(label.dimension, [])
                if label.value not in values:
                    values.append(label.value)
            taxonomy = {dim: tuple(values) for dim, values in derived.items()}
        self._langs = langs
        self._lang_index = {lang: i for i, lang in enumerate(langs)}
        self._lang_codes = lang_codes
        self._correct = correct
        self._masks = masks
        self._item_ids = item_ids
        self.taxonomy = taxonomy

    def __len__(self) -> int:
        return int(self._correct.size)

    @property
    def languages(self) -> tuple[str, ...]:
        return self._langs

    @property
    def records(self) -> tuple[OutcomeRecord, ...]:
        """Materialize the record view (implicit ids become "r<i>")."""
        ids = self._item_ids or tuple(f"r{i}" for i in range(len(self)))
        groups_by_row: dict[int, set[GroupLabel]] = {}
        for label, mask in self._masks.items():
            for row in np.flatnonzero(mask):
                groups_by_row.setdefault(int(row), set()).add(label)
        return tuple(
            OutcomeRecord(
                item_id=ids[i],
                lang=self._langs[self._lang_codes[i]],
                groups=frozenset(groups_by_row.get(i, ())),
                correct=bool(self._correct[i]),
            )
            for i in range(len(self))
        )

    def _lang_mask(self, language: str) -> np.ndarray:
        idx = self._lang_index.get(language)
        if idx is None:
            return np.zeros(len(self), dtype=bool)
        return self._lang_codes == idx

    def _label_mask(self, label: GroupLabel) -> np.ndarray:
        values = self.taxonomy.get(label.dimension)
        if values is None or label.value not in values:
            raise TaxonomyError(f"unknown group label {label}")
        mask = self._masks.get(label)
        if mask is None:
            return np.zeros(len(self), dtype=bool)
        return mask

    def cohort_mask(self, language: str, groups) -> np.ndarray:
        mask = self._lang_mask(language)
        for label in _as_labels(groups):
            mask = mask & self._label_mask(label)
        return mask

    def _mask_accuracy(self, mask: np.ndarray) -> float | None:
        n = int(np.count_nonzero(mask))
        if n == 0:
            return None
        return int(np.count_nonzero(self._correct & mask)) / n


def accuracy(outcomes: OutcomeSet, language: str) -> float:
    """Fraction of correct outcomes in one language."""
    acc = outcomes._mask_accuracy(outcomes._lang_mask(language))
    if acc is None:
        raise EmptyCohortError(f"no records for language {language!r}")
    return acc


def group_accuracy(outcomes: OutcomeSet, language: str, groups) -> float | None:
    """Accuracy within a (possibly composite) group cohort; None when empty."""
    return outcomes._mask_accuracy(outcomes.cohort_mask(language, groups))


def gap(outcomes: OutcomeSet, lang_a: str, lang_b: str) -> float:
    """Cross-lingual accuracy gap |acc(lang_a) - acc(lang_b)|."""
    return abs(accuracy(outcomes, lang_a) - accuracy(outcomes, lang_b))


def disp(outcomes: OutcomeSet, language: str, a, b) -> float | None:
    """Group rate gap |acc_a - acc_b| in one language; None when a cohort is empty."""
    acc_a = group_accuracy(outcomes, language, a)
    acc_b = group_accuracy(outcomes, language, b)
    if acc_a is None or acc_b is None:
        return None
    return abs(acc_a - acc_b)


@dataclass(frozen=True)
class DecompositionCheck:
    """One evaluation of the cross-lingual cross-group disparity bound."""

    lang_a: str
    lang_b: str
    group_a: GroupLabel
    group_b: GroupLabel
    lhs: float
    rhs: float
    holds: bool


def _partition_stats(
    outcomes: OutcomeSet, language: str, a: GroupLabel, b: GroupLabel
) -> tuple[float, float, float, float, float]:
    """(acc_a, acc_b, p_a, p_b, disp) for a binary partition within one language."""
    lang_mask = outcomes._lang_mask(language)
    n = int(np.count_nonzero(lang_mask))
    if n == 0:
        raise EmptyCohortError(f"no records for language {language!r}")
    mask_a = lang_mask & outcomes._label_mask(a)
    mask_b = lang_mask & outcomes._label_mask(b)
    if bool(np.any(mask_a & mask_b)):
        raise PartitionError(f"groups {a} and {b} overlap in language {language!r}")
    if bool(np.any(lang_mask & ~mask_a & ~mask_b)):
        raise PartitionError(
            f"groups {a} and {b} do not cover language {language!r}"
        )
    n_a = int(np.count_nonzero(mask_a))
    n_b = int(np.count_nonzero(mask_b))
    if n_a == 0 or n_b == 0:
        raise EmptyCohortError(
            f"empty cohort for {a if n_a == 0 else b} in language {language!r}"
        )
    acc_a = int(np.count_nonzero(outcomes._correct & mask_a)) / n_a
    acc_b = int(np.count_nonzero(outcomes._correct & mask_b)) / n_b
    return acc_a, acc_b, n_a / n, n_b / n, abs(acc_a - acc_b)


def decomposition_check(
    outcomes: OutcomeSet, lang_a: str, lang_b: str, a: GroupLabel, b: GroupLabel
) -> DecompositionCheck:
    """Check |acc_a(L) - acc_b(L')| <= gap + p_b(L)*disp(L) + p_a(L')*disp(L').

    Requires {a, b} to partition the records of each language. Proportions are
    taken per language (p_b from lang_a's cohort, p_a from lang_b's), which is
    the form the mixture identity yields; with identical proportions across
    languages it coincides with the single-p statement.
    """
    acc_a_l, _, _, p_b_l, disp_l = _partition_stats(outcomes, lang_a, a, b)
    _, acc_b_lp, p_a_lp, _, disp_lp = _partition_stats(outcomes, lang_b, a, b)
    lhs = abs(acc_a_l - acc_b_lp)
    rhs = gap(outcomes, lang_a, lang_b) + p_b_l * disp_l + p_a_lp * disp_lp
    return DecompositionCheck(
        lang_a=lang_a,
        lang_b=lang_b,
        group_a=a,
        group_b=b,
        lhs=lhs,
        rhs=rhs,
        holds=lhs <= rhs + DECOMPOSITION_TOLERANCE,
    )


GroupKey = frozenset  # frozenset[GroupLabel] cohort keys in report maps


@dataclass(frozen=True)
class GroupFairnessReport:
    """Per-language accuracies, gap matrix, group disparities, and bound checks.

    Cohort keys in ``acc_by_group`` / ``disp_by_group`` are frozensets of
    GroupLabel: singletons for plain per-group entries, composites (e.g.
    {gender=female, race=Black}) for the contrast-within-condition layout.
    UNDEFINED entries are None. ``warnings`` records every cohort that had to
    be skipped.
    """

    languages: tuple[str, ...]
    group_dims: tuple[str, ...]
    taxonomy: dict[str, tuple[str, ...]]
    acc_by_lang: dict[str, float | None]
    gap_matrix: dict[tuple[str, str], float | None]
    acc_by_group: dict[tuple[str, frozenset[GroupLabel]], float | None]
    disp_by_group: dict[tuple[str, frozenset[GroupLabel], frozenset[GroupLabel]], float | None]
    proportions: dict[GroupLabel, float | None]
    decomposition_checks: tuple[DecompositionCheck, ...]
    warnings: tuple[str, ...]

    def binary_dims(self) -> tuple[str, ...]:
        return tuple(d for d in self.group_dims if len(self.taxonomy[d]) == 2)


def run_group_audit(
    outcomes: OutcomeSet,
    languages: Sequence[str],
    group_dims: Sequence[str],
) -> GroupFairnessReport:
    """Full group-fairness audit over the requested languages and dimensions.

    Emits per-language accuracy, the full gap matrix, per-group accuracy and
    pairwise disp for every dimension, contrast-within-condition composites
    for each binary dimension against every other dimension, and decomposition
    checks for each binary dimension over all language pairs. Cohort problems
    degrade to UNDEFINED entries plus a warning; the audit never aborts.
    """
    if len(languages) == 0:
        raise EmptyCohortError("no languages requested")
    languages = tuple(dict.fromkeys(languages))
    for dim in group_dims:
        if dim not in outcomes.taxonomy:
            raise TaxonomyError(f"unknown group dimension {dim!r}")
    group_dims = tuple(dict.fromkeys(group_dims))
    warnings: list[str] = []

    acc_by_lang: dict[str, float | None] = {}
    for lang in languages:
        acc = outcomes._mask_accuracy(outcomes._lang_mask(lang))
        if acc is None:
            warnings.append(f"language {lang!r}: no records")
        acc_by_lang[lang] = acc

    gap_matrix: dict[tuple[str, str], float | None] = {}
    for la in languages:
        for lb in languages:
            acc_a, acc_b = acc_by_lang[la], acc_by_lang[lb]
            gap_matrix[(la, lb)] = (
                None if acc_a is None or acc_b is None else abs(acc_a - acc_b)
            )

    proportions: dict[GroupLabel, float | None] = {}
    for dim in group_dims:
        dim_labels = [GroupLabel(dim, v) for v in outcomes.taxonomy[dim]]
        dim_mask = np.zeros(len(outcomes), dtype=bool)
        for label in dim_labels:
            dim_mask |= outcomes._label_mask(label)
        denom = int(np.count_nonzero(dim_mask))
        if denom == 0:
            warnings.append(f"dimension {dim!r}: no labeled records")
        for label in dim_labels:
            proportions[label] = (
                None
                if denom == 0
                else int(np.count_nonzero(outcomes._label_mask(label))) / denom
            )

    acc_by_group: dict[tuple[str, frozenset[GroupLabel]], float | None] = {}
    disp_by_group: dict[
        tuple[str, frozenset[GroupLabel], frozenset[GroupLabel]], float | None
    ] = {}

    def record_cohort(lang: str, cohort: frozenset[GroupLabel]) -> None:
        acc = group_accuracy(outcomes, lang, cohort)
        if acc is None:
            warnings.append(f"language {lang!r}: empty cohort {{{_cohort_str(cohort)}}}")
        acc_by_group[(lang, cohort)] = acc

    def record_disp(lang: str, ca: frozenset[GroupLabel], cb: frozenset[GroupLabel]) -> None:
        disp_by_group[(lang, ca, cb)] = disp(outcomes, lang, ca, cb)

    for lang in languages:
        for dim in group_dims:
            values = outcomes.taxonomy[dim]
            for value in values:
                record_cohort(lang, frozenset({GroupLabel(dim, value)}))
            for i, va in enumerate(values):
                for vb in values[i + 1 :]:
                    record_disp(
                        lang,
                        frozenset({GroupLabel(dim, va)}),
                        frozenset({GroupLabel(dim, vb)}),
                    )

    binary_dims = tuple(d for d in group_dims if len(outcomes.taxonomy[d]) == 2)
    for bdim in binary_dims:
        b1, b2 = (GroupLabel(bdim, v) for v in outcomes.taxonomy[bdim])
        for odim in group_dims:
            if odim == bdim:
                continue
            for ovalue in outcomes.taxonomy[odim]:
                cond = GroupLabel(odim, ovalue)
                for lang in languages:
                    ca = frozenset({b1, cond})
                    cb = frozenset({b2, cond})
                    record_cohort(lang, ca)
                    record_cohort(lang, cb)
                    record_disp(lang, ca, cb)

    checks: list[DecompositionCheck] = []
    for bdim in binary_dims:
        b1, b2 = (GroupLabel(bdim, v) for v in outcomes.taxonomy[bdim])
        for i, la in enumerate(languages):
            for lb in languages[i + 1 :]:
                try:
                    checks.append(decomposition_check(outcomes, la, lb, b1, b2))
                except (PartitionError, EmptyCohortError) as exc:
                    warnings.append(f"decomposition check ({la}, {lb}, {bdim}): {exc}")

    return GroupFairnessReport(
        languages=languages,
        group_dims=group_dims,
        taxonomy={d: outcomes.taxonomy[d] for d in group_dims},
        acc_by_lang=acc_by_lang,
        gap_matrix=gap_matrix,
        acc_by_group=acc_by_group,
        disp_by_group=disp_by_group,
        proportions=proportions,
        decomposition_checks=tuple(checks),
        warnings=tuple(warnings),
    )


def _cohort_str(cohort: frozenset[GroupLabel]) -> str:
    return ", ".join(sorted(str(lbl) for lbl in cohort))
