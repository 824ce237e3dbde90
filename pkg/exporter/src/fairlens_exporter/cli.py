"""Exporter CLI: `fairlens-export export` and `fairlens-export export-prompts`."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .encoders import ExporterError, load_encoder
from .export import ExportJob, export_embeddings, export_prompts
from .prompts import load_prompt_spec


@click.group()
@click.version_option(package_name="fairlens-exporter", prog_name="fairlens-export")
def cli():
    """Write image/text embeddings in the fairlens embjsonl format."""


@cli.command("export")
@click.option("--model", "model_id", required=True,
              help="Encoder id: dev:<dim>[:<seed>] or a sentence-transformers checkpoint.")
@click.option("--image-model", "image_model_id", default=None,
              help="Separate checkpoint for images (multilingual text + vision pairing).")
@click.option("--images", type=click.Path(exists=True), default=None,
              help="Directory of images or a .txt list of paths.")
@click.option("--texts", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TSV of id<TAB>lang<TAB>text rows.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--normalize", is_flag=True, default=False,
              help="L2-normalize features (off by default; raw norms feed the audit bounds).")
def cmd_export(model_id, image_model_id, images, texts, out, normalize):
    """Embed a directory of images and/or a table of text rows."""
    if images is None and texts is None:
        raise click.UsageError("nothing to export: pass --images and/or --texts")
    encoder = load_encoder(model_id, image_model_id)
    result = export_embeddings(
        ExportJob(
            encoder=encoder,
            images=Path(images) if images else None,
            texts=Path(texts) if texts else None,
            out=Path(out),
            normalize=normalize,
        )
    )
    click.echo(
        f"wrote {result.records_written} records (dim={result.dim}, "
        f"model={result.model_id}) to {out}"
    )
    if not result.ok:
        for err in result.errors:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)


@cli.command("export-prompts")
@click.option("--model", "model_id", required=True)
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="prompts.json (dimension, labels, templates, surfaces).")
@click.option("--languages", "languages_csv", default=None,
              help="Comma-separated subset (default: all declared languages).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--normalize", is_flag=True, default=False)
def cmd_export_prompts(model_id, spec_path, languages_csv, out, normalize):
    """Render the prompt grid for a spec and embed every prompt string."""
    spec = load_prompt_spec(spec_path)
    languages = (
        [s.strip() for s in languages_csv.split(",") if s.strip()]
        if languages_csv
        else list(spec.languages)
    )
    encoder = load_encoder(model_id)
    result = export_prompts(encoder, spec, languages, Path(out), normalize=normalize)
    click.echo(
        f"wrote {result.records_written} prompt records (dim={result.dim}, "
        f"model={result.model_id}) to {out}"
    )


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="fairlens-export", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 64
    except SystemExit as exc:
        return int(exc.code or 0)
    except ExporterError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
