"""Command-line front door: audits, theory verification, reporting.

Exit codes: 0 success, 1 bound-check violation, 2 input validation failure,
64 usage error. No subcommand writes partial output: every report is computed
first, staged to a temp file, and atomically renamed into the --out
directory. All randomness is seed-controlled through flags; nothing is seeded
from the wall clock, so fixed flags give byte-identical outputs.

FAIRLENS_THREADS caps the audit worker count (0 or unset = auto). The thread
count never changes report contents and is not echoed into them.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .errors import FairlensError, PivotError
from .individual import run_individual_audit, shuffled_audit
from .ingest import (
    assemble_triples,
    build_prompt_embeddings,
    load_embeddings,
    load_manifest,
    load_prompt_spec,
    manifest_image_items,
    resolve_truth,
)
from .groups import run_group_audit
from .oracle import OracleConfig, run_all_checks
from .report import (
    build_envelope,
    emit_group_tables,
    emit_json,
    emit_scatter_table,
    group_payload,
    individual_payload,
    sha256_digest,
    theory_payload,
)
from .zeroshot import run_zeroshot

__all__ = ["cli", "main", "entry"]


def _workers() -> int | None:
    raw = os.environ.get("FAIRLENS_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise click.UsageError(f"FAIRLENS_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise click.UsageError("FAIRLENS_THREADS must be >= 0")
    if n == 0:
        return os.cpu_count()
    return n


def _timestamp() -> str | None:
    return os.environ.get("FAIRLENS_TIMESTAMP") or None


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Stage every file to a temp name, then rename into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    for name, content in files.items():
        tmp = out_dir / f".{name}.tmp-{os.getpid()}"
        tmp.write_text(content, encoding="utf-8", newline="")
        staged.append((tmp, out_dir / name))
    for tmp, target in staged:
        os.replace(tmp, target)


def _positive_int(_ctx, param, value):
    if value is not None and value < 1:
        raise click.UsageError(f"--{param.name} must be >= 1")
    return value


def _range_pair(kind):
    def parse(_ctx, param, value):
        try:
            lo_s, hi_s = value.split(":")
            return kind(lo_s), kind(hi_s)
        except ValueError:
            raise click.UsageError(f"--{param.name} must look like LO:HI, got {value!r}")

    return parse


@click.group()
@click.version_option(package_name="fairlens", prog_name="fairlens")
def cli():
    """Fairness audits for multilingual multimodal embeddings."""


@cli.command("audit-individual")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--lang-a", required=True, help="Reference language (its caption norm anchors the approx bound).")
@click.option("--lang-b", required=True)
@click.option("--shuffle", "shuffle_seed", type=int, default=None,
              help="Permute images across triples with this seed (dissimilar-pairing audit).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def cmd_audit_individual(embeddings_path, manifest_path, lang_a, lang_b, shuffle_seed, out_dir):
    """Similarity-gap / caption-distance audit over grounded triples."""
    store = load_embeddings(embeddings_path)
    manifest = load_manifest(manifest_path, store)
    triples = assemble_triples(manifest, store)
    workers = _workers()
    if shuffle_seed is None:
        report = run_individual_audit(triples, lang_a, lang_b, workers=workers)
    else:
        report = shuffled_audit(triples, lang_a, lang_b, shuffle_seed, workers=workers)
    envelope = build_envelope(
        payload_kind="individual_fairness",
        payload=individual_payload(report),
        input_digests={
            "embeddings": sha256_digest(embeddings_path),
            "manifest": sha256_digest(manifest_path),
        },
        config={
            "command": "audit-individual",
            "lang_a": lang_a,
            "lang_b": lang_b,
            "shuffle_seed": shuffle_seed,
        },
        timestamp=_timestamp(),
    )
    _write_outputs(
        Path(out_dir),
        {
            "individual.report.json": emit_json(envelope),
            "individual.scatter.csv": emit_scatter_table(report),
        },
    )
    alpha = "undefined" if report.alpha_empirical is None else f"{report.alpha_empirical:.6g}"
    click.echo(
        f"audited {len(report.audits)} pairs ({lang_a}/{lang_b}): "
        f"alpha={alpha}, skipped={report.skipped_count}, "
        f"exact-bound violations={report.exact_bound_violations}"
    )


@cli.command("audit-group")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt-spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt-embeddings", "prompt_emb_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--languages", "languages_csv", default=None,
              help="Comma-separated language tags (default: all declared in the prompt spec).")
@click.option("--pivot", "pivot_language", default="en", show_default=True,
              help="Reference language for amplified/mitigated flags.")
@click.option("--group-dims", "group_dims_csv", default=None,
              help="Comma-separated group dimensions (default: all declared in the manifest).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def cmd_audit_group(embeddings_path, manifest_path, spec_path, prompt_emb_path,
                    languages_csv, pivot_language, group_dims_csv, out_dir):
    """Zero-shot classification followed by the group-fairness audit."""
    store = load_embeddings(embeddings_path)
    manifest = load_manifest(manifest_path, store)
    spec = load_prompt_spec(spec_path)
    prompt_store = load_embeddings(prompt_emb_path)
    languages = (
        [s.strip() for s in languages_csv.split(",") if s.strip()]
        if languages_csv
        else list(spec.languages)
    )
    if pivot_language not in languages:
        raise PivotError(f"pivot language {pivot_language!r} not in audited languages {languages}")
    prompts = build_prompt_embeddings(prompt_store, spec, languages)
    images = manifest_image_items(manifest, store)
    truth = resolve_truth(manifest, spec)
    outcomes = run_zeroshot(
        images, prompts, spec, truth, languages,
        taxonomy=manifest.taxonomy or None,
    )
    group_dims = (
        [s.strip() for s in group_dims_csv.split(",") if s.strip()]
        if group_dims_csv
        else list(manifest.taxonomy)
    )
    report = run_group_audit(outcomes, languages, group_dims)
    envelope = build_envelope(
        payload_kind="group_fairness",
        payload=group_payload(report),
        input_digests={
            "embeddings": sha256_digest(embeddings_path),
            "manifest": sha256_digest(manifest_path),
            "prompt_spec": sha256_digest(spec_path),
            "prompt_embeddings": sha256_digest(prompt_emb_path),
        },
        config={
            "command": "audit-group",
            "languages": languages,
            "pivot": pivot_language,
            "group_dims": group_dims,
            "classified_dimension": spec.dimension,
        },
        timestamp=_timestamp(),
    )
    tables = emit_group_tables(report, pivot_language)
    _write_outputs(
        Path(out_dir),
        {
            "group.report.json": emit_json(envelope),
            "group.accuracy.csv": tables["accuracy"],
            "group.disp.csv": tables["disp"],
        },
    )
    click.echo(
        f"audited {len(images)} images x {len(languages)} languages "
        f"({spec.dimension} classification); decomposition checks: "
        f"{sum(1 for c in report.decomposition_checks if c.holds)}/{len(report.decomposition_checks)} hold"
    )
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)


@cli.command("verify-theory")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--trials", type=int, default=100_000, show_default=True, callback=_positive_int)
@click.option("--dims", default="2:512", show_default=True, callback=_range_pair(int),
              help="Vector dimension range LO:HI, sampled per trial.")
@click.option("--rho-fractions", default="0.05:0.95", show_default=True, callback=_range_pair(float),
              help="Ball radius as a fraction of the caption norm, LO:HI in [0, 1).")
@click.option("--tolerance", type=float, default=1e-9, show_default=True)
@click.option("--out", "out_dir", default=None, type=click.Path(file_okay=False),
              help="Also write theory.report.json here.")
def cmd_verify_theory(seed, trials, dims, rho_fractions, tolerance, out_dir):
    """Randomized numerical verification of all bound inequalities."""
    try:
        config = OracleConfig(
            seed=seed,
            trials=trials,
            dim_range=dims,
            rho_fraction_range=rho_fractions,
            tolerance=tolerance,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    result = run_all_checks(config)
    if out_dir is not None:
        envelope = build_envelope(
            payload_kind="theory_verification",
            payload=theory_payload(result),
            input_digests={},
            config={
                "command": "verify-theory",
                "seed": seed,
                "trials": trials,
                "dims": list(dims),
                "rho_fractions": list(rho_fractions),
                "tolerance": tolerance,
            },
            timestamp=_timestamp(),
        )
        _write_outputs(Path(out_dir), {"theory.report.json": emit_json(envelope)})
    for name, st in result.stats.items():
        status = "ok" if st.violations == 0 else f"{st.violations} VIOLATIONS"
        click.echo(f"{name}: {st.checked} trials, {status}, max_slack={st.max_slack:.6g}")
    if not result.ok:
        click.echo(f"{result.violation_count} violation(s); replay inputs follow", err=True)
        for v in result.violations:
            click.echo(
                f"  {v.inequality} trial={v.trial} lhs={v.lhs!r} rhs={v.rhs!r} inputs={v.inputs!r}",
                err=True,
            )
        sys.exit(1)


def main(argv=None) -> int:
    """Run the CLI, mapping errors onto the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="fairlens", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 130
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 64
    except SystemExit as exc:
        return int(exc.code or 0)
    except FairlensError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
