"""Deterministic serialization of audit reports.

All emitters are locale-independent and byte-stable: fixed key order, shortest
round-trip float encoding, LF line endings. Percentages in CSV tables are
rendered to one decimal with ties rounding away from zero; the JSON documents
keep full-precision fractions so no information is lost to table rounding.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Mapping

from . import __version__
from .errors import PivotError
from .groups import GroupFairnessReport, GroupLabel
from .individual import IndividualFairnessReport
from .oracle import OracleResult

__all__ = [
    "sha256_digest",
    "digest_bytes",
    "render_percent",
    "build_envelope",
    "individual_payload",
    "group_payload",
    "theory_payload",
    "emit_json",
    "emit_scatter_table",
    "emit_group_tables",
]


def digest_bytes(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def sha256_digest(path: str | Path) -> str:
    """Content hash of an input file, for the report envelope."""
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def render_percent(fraction: float) -> str:
    """Render a fraction as a one-decimal percentage, ties away from zero."""
    from decimal import ROUND_HALF_UP, Decimal

    return str(Decimal(repr(fraction * 100.0)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _label_obj(label: GroupLabel) -> dict:
    return {"dimension": label.dimension, "value": label.value}


def _cohort_list(cohort: Iterable[GroupLabel]) -> list[dict]:
    return [_label_obj(lbl) for lbl in sorted(cohort, key=lambda l: (l.dimension, l.value))]


def _nullable(value: float | None, reason: str) -> dict:
    if value is None:
        return {"value": None, "reason": reason}
    return {"value": value, "reason": None}


def build_envelope(
    payload_kind: str,
    payload: dict,
    input_digests: Mapping[str, str],
    config: Mapping,
    timestamp: str | None = None,
) -> dict:
    """Wrap a payload with provenance: tool version, input hashes, config echo.

    The timestamp is whatever the caller supplies (or null); reports never
    self-stamp with the wall clock, so identical inputs yield identical bytes.
    """
    return {
        "tool": "fairlens",
        "tool_version": __version__,
        "payload_kind": payload_kind,
        "timestamp": timestamp,
        "input_digests": dict(input_digests),
        "config": dict(config),
        "payload": payload,
    }


def individual_payload(report: IndividualFairnessReport) -> dict:
    return {
        "lang_a": report.lang_a,
        "lang_b": report.lang_b,
        "shuffled": report.shuffled,
        "shuffle_seed": report.shuffle_seed,
        "alpha_definition": report.alpha_definition,
        "alpha_empirical": report.alpha_empirical,
        "ratio_p95": report.ratio_p95,
        "ratio_p99": report.ratio_p99,
        "mean_text_distance": report.mean_text_distance,
        "skipped_count": report.skipped_count,
        "exact_bound_violations": report.exact_bound_violations,
        "approx_bound_violations": report.approx_bound_violations,
        "audits": [
            {
                "image_id": a.image_id,
                "lang_a": a.lang_a,
                "lang_b": a.lang_b,
                "sim_gap": a.sim_gap,
                "text_distance": a.text_distance,
                "ratio": a.ratio,
                "skipped": a.skipped,
                "exact_bound": a.exact_bound,
                "approx_bound": a.approx_bound,
            }
            for a in report.audits
        ],
    }


def group_payload(report: GroupFairnessReport) -> dict:
    return {
        "languages": list(report.languages),
        "group_dims": list(report.group_dims),
        "taxonomy": {dim: list(values) for dim, values in report.taxonomy.items()},
        "metadata": {"average_aggregation": "macro_over_condition_labels"},
        "accuracy_by_language": {
            lang: _nullable(report.acc_by_lang[lang], "empty cohort")
            for lang in report.languages
        },
        "gap_matrix": {
            la: {
                lb: report.gap_matrix[(la, lb)]
                for lb in report.languages
            }
            for la in report.languages
        },
        "proportions": [
            {
                "dimension": label.dimension,
                "value": label.value,
                "proportion": proportion,
            }
            for label, proportion in report.proportions.items()
        ],
        "group_accuracy": [
            {
                "language": lang,
                "groups": _cohort_list(cohort),
                **_nullable(acc, "empty cohort"),
            }
            for (lang, cohort), acc in report.acc_by_group.items()
        ],
        "disp": [
            {
                "language": lang,
                "group_a": _cohort_list(ca),
                "group_b": _cohort_list(cb),
                **_nullable(value, "empty cohort"),
            }
            for (lang, ca, cb), value in report.disp_by_group.items()
        ],
        "decomposition_checks": [
            {
                "lang_a": c.lang_a,
                "lang_b": c.lang_b,
                "group_a": _label_obj(c.group_a),
                "group_b": _label_obj(c.group_b),
                "lhs": c.lhs,
                "rhs": c.rhs,
                "holds": c.holds,
            }
            for c in report.decomposition_checks
        ],
        "warnings": list(report.warnings),
    }


def theory_payload(result: OracleResult) -> dict:
    cfg = result.config
    return {
        "seed": cfg.seed,
        "trials": cfg.trials,
        "dim_range": list(cfg.dim_range),
        "rho_fraction_range": list(cfg.rho_fraction_range),
        "tolerance": cfg.tolerance,
        "ok": result.ok,
        "checks": {
            name: {
                "checked": st.checked,
                "violations": st.violations,
                "max_slack": st.max_slack,
                "min_slack": st.min_slack,
                "extras": dict(st.extras),
            }
            for name, st in result.stats.items()
        },
        "violations": [
            {
                "inequality": v.inequality,
                "trial": v.trial,
                "lhs": v.lhs,
                "rhs": v.rhs,
                "inputs": v.inputs,
            }
            for v in result.violations
        ],
    }


def emit_json(document: dict) -> str:
    """Serialize a report document: stable ordering, full-precision floats."""
    return json.dumps(document, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def emit_scatter_table(report: IndividualFairnessReport) -> str:
    """Plot-ready columns (image_id, text_distance, sim_gap, exact_bound).

    The leading comment line carries the empirical alpha (the slope of the
    envelope line in a gap-vs-distance scatter plot).
    """
    alpha = "undefined" if report.alpha_empirical is None else repr(report.alpha_empirical)
    buf = io.StringIO()
    buf.write(f"# alpha_empirical={alpha}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id", "text_distance", "sim_gap", "exact_bound"])
    for a in report.audits:
        writer.writerow([a.image_id, repr(a.text_distance), repr(a.sim_gap), repr(a.exact_bound)])
    return buf.getvalue()


def _contrast_layout(report: GroupFairnessReport) -> tuple[str, str] | None:
    """Pick (contrast dim, condition dim) for the pivot tables.

    The contrast is the first binary dimension, conditioned on the first other
    dimension; further combinations stay available in the JSON document.
    """
    binary = report.binary_dims()
    if not binary:
        return None
    contrast = binary[0]
    others = [d for d in report.group_dims if d != contrast]
    if not others:
        return None
    return contrast, others[0]


def _flag(value: float | None, pivot_value: float | None, is_pivot: bool) -> str:
    if is_pivot:
        return "pivot"
    if value is None or pivot_value is None:
        return "undefined"
    if value > pivot_value:
        return "amplified"
    if value < pivot_value:
        return "mitigated"
    return "unchanged"


def _fmt(value: float | None) -> str:
    return "" if value is None else render_percent(value)


def emit_group_tables(report: GroupFairnessReport, pivot_language: str) -> dict[str, str]:
    """Pivot-flagged accuracy and disp tables as CSV strings.

    With a binary contrast dimension and a conditioning dimension the layout
    mirrors a (language x contrast label) accuracy grid over condition columns
    plus an "average" macro-column, and a disp grid with a flag column per
    condition marking each language's disparity as amplified (> pivot),
    mitigated (< pivot), unchanged, or undefined relative to the pivot
    language. Without such a pair of dimensions, rows are languages and
    columns are the single dimension's labels and label pairs.
    """
    if pivot_language not in report.languages:
        raise PivotError(f"pivot language {pivot_language!r} not in report")
    layout = _contrast_layout(report)
    if layout is not None:
        return _emit_contrast_tables(report, pivot_language, *layout)
    return _emit_flat_tables(report, pivot_language)


def _composite(report, lang, contrast_label: GroupLabel, cond_label: GroupLabel):
    return report.acc_by_group.get((lang, frozenset({contrast_label, cond_label})))


def _emit_contrast_tables(
    report: GroupFairnessReport, pivot: str, contrast_dim: str, cond_dim: str
) -> dict[str, str]:
    contrast_values = report.taxonomy[contrast_dim]
    cond_values = report.taxonomy[cond_dim]

    def macro_avg(lang: str, c_label: GroupLabel) -> float | None:
        cells = [
            _composite(report, lang, c_label, GroupLabel(cond_dim, o)) for o in cond_values
        ]
        defined = [c for c in cells if c is not None]
        return sum(defined) / len(defined) if defined else None

    acc_buf = io.StringIO()
    acc = csv.writer(acc_buf, lineterminator="\n")
    acc.writerow(["language", contrast_dim, *cond_values, "average"])
    for lang in report.languages:
        for cv in contrast_values:
            c_label = GroupLabel(contrast_dim, cv)
            cells = [
                _composite(report, lang, c_label, GroupLabel(cond_dim, o))
                for o in cond_values
            ]
            acc.writerow([lang, cv, *map(_fmt, cells), _fmt(macro_avg(lang, c_label))])

    def disp_cell(lang: str, cond_value: str) -> float | None:
        ca = frozenset({GroupLabel(contrast_dim, contrast_values[0]), GroupLabel(cond_dim, cond_value)})
        cb = frozenset({GroupLabel(contrast_dim, contrast_values[1]), GroupLabel(cond_dim, cond_value)})
        return report.disp_by_group.get((lang, ca, cb))

    def avg_disp(lang: str) -> float | None:
        a = macro_avg(lang, GroupLabel(contrast_dim, contrast_values[0]))
        b = macro_avg(lang, GroupLabel(contrast_dim, contrast_values[1]))
        if a is None or b is None:
            return None
        return abs(a - b)

    disp_buf = io.StringIO()
    dw = csv.writer(disp_buf, lineterminator="\n")
    header = ["language"]
    for o in cond_values:
        header += [o, f"{o}_flag"]
    header += ["average", "average_flag"]
    dw.writerow(header)
    pivot_cells = {o: disp_cell(pivot, o) for o in cond_values}
    pivot_avg = avg_disp(pivot)
    for lang in report.languages:
        row = [lang]
        for o in cond_values:
            value = disp_cell(lang, o)
            row += [_fmt(value), _flag(value, pivot_cells[o], lang == pivot)]
        avg = avg_disp(lang)
        row += [_fmt(avg), _flag(avg, pivot_avg, lang == pivot)]
        dw.writerow(row)

    return {"accuracy": acc_buf.getvalue(), "disp": disp_buf.getvalue()}


def _emit_flat_tables(report: GroupFairnessReport, pivot: str) -> dict[str, str]:
    dims = report.group_dims
    label_cols = [GroupLabel(d, v) for d in dims for v in report.taxonomy[d]]
    pair_cols = [
        (GroupLabel(d, va), GroupLabel(d, vb))
        for d in dims
        for i, va in enumerate(report.taxonomy[d])
        for vb in report.taxonomy[d][i + 1 :]
    ]

    acc_buf = io.StringIO()
    acc = csv.writer(acc_buf, lineterminator="\n")
    acc.writerow(["language", "overall", *[str(l) for l in label_cols]])
    for lang in report.languages:
        cells = [report.acc_by_group.get((lang, frozenset({l}))) for l in label_cols]
        acc.writerow([lang, _fmt(report.acc_by_lang.get(lang)), *map(_fmt, cells)])

    disp_buf = io.StringIO()
    dw = csv.writer(disp_buf, lineterminator="\n")
    header = ["language"]
    for a, b in pair_cols:
        col = f"{a}|{b}"
        header += [col, f"{col}_flag"]
    dw.writerow(header)
    pivot_vals = {
        (a, b): report.disp_by_group.get((pivot, frozenset({a}), frozenset({b})))
        for a, b in pair_cols
    }
    for lang in report.languages:
        row = [lang]
        for a, b in pair_cols:
            value = report.disp_by_group.get((lang, frozenset({a}), frozenset({b})))
            row += [_fmt(value), _flag(value, pivot_vals[(a, b)], lang == pivot)]
        dw.writerow(row)

    return {"accuracy": acc_buf.getvalue(), "disp": disp_buf.getvalue()}
