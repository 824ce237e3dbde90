"""Export jobs: encode images and text rows, write canonical embjsonl lines.

Output lines follow the audit engine's embedding file contract: one JSON
object per line with keys id, kind, lang, dim, vec in that order, floats in
shortest round-trip form, LF line endings. Every record in a file shares one
dimension and the model id is reported with the job result for provenance.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import Encoder, ExporterError
from .prompts import PromptSpec, prompt_record_id, render_prompts

__all__ = ["ExportJob", "ExportResult", "export_embeddings", "export_prompts"]

_LANG_RE = re.compile(r"^[a-z]{2,3}$")
_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp", ".gif")


@dataclass
class ExportJob:
    """One export run: which encoder, which inputs, where to write."""

    encoder: Encoder
    images: Path | None = None  # directory of images, or a .txt list of paths
    texts: Path | None = None  # TSV rows: id <tab> lang <tab> text
    out: Path = Path("embeddings.embjsonl")
    normalize: bool = False  # L2-normalize features (default off: the audit
    # engine's cosine is scale-invariant and raw norms feed its bounds)


@dataclass
class ExportResult:
    model_id: str
    dim: int
    records_written: int
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _dump_line(record_id: str, kind: str, lang: str | None, vec: np.ndarray) -> str:
    obj = {
        "id": record_id,
        "kind": kind,
        "lang": lang,
        "dim": int(vec.size),
        "vec": [float(x) for x in vec],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _collect_image_paths(images: Path) -> list[Path]:
    images = Path(images)
    if images.is_dir():
        return sorted(
            p for p in images.iterdir() if p.suffix.lower() in _IMAGE_EXTENSIONS
        )
    if images.is_file():
        lines = images.read_text(encoding="utf-8").splitlines()
        return [Path(line.strip()) for line in lines if line.strip()]
    raise ExporterError(f"image source {images} is neither a directory nor a list file")


def _parse_text_rows(texts: Path) -> list[tuple[str, str, str]]:
    rows = []
    for lineno, line in enumerate(
        Path(texts).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ExporterError(f"{texts}:{lineno}: expected id<TAB>lang<TAB>text")
        record_id, lang, text = parts
        if not _LANG_RE.match(lang):
            raise ExporterError(f"{texts}:{lineno}: invalid language tag {lang!r}")
        rows.append((record_id, lang, text))
    return rows


def _finish(vec: np.ndarray, normalize: bool) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    if normalize:
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ExporterError("cannot normalize a zero vector")
        vec = vec / norm
    return vec


def export_embeddings(job: ExportJob) -> ExportResult:
    """Encode every image and text row; one record each, all one dim.

    Unreadable items are collected into the error ledger and skipped; the
    result is not ok (callers exit nonzero) if any item failed.
    """
    encoder = job.encoder
    lines: list[str] = []
    errors: list[str] = []
    seen: set[str] = set()
    file_dim: int | None = None

    def push(record_id: str, kind: str, lang: str | None, vec: np.ndarray) -> None:
        nonlocal file_dim
        if record_id in seen:
            errors.append(f"duplicate id {record_id!r}")
            return
        vec = _finish(vec, job.normalize)
        # one dimension per file: a mismatched image/text model pairing must
        # fail loudly, not produce a file the audit engine rejects later
        if file_dim is None:
            file_dim = int(vec.size)
        elif int(vec.size) != file_dim:
            errors.append(
                f"record {record_id!r}: dim {vec.size} differs from file dim {file_dim}"
            )
            return
        seen.add(record_id)
        lines.append(_dump_line(record_id, kind, lang, vec))

    if job.images is not None:
        for path in _collect_image_paths(Path(job.images)):
            try:
                push(path.stem, "image", None, encoder.encode_image(path))
            except (OSError, ExporterError) as exc:
                errors.append(f"image {path}: {exc}")
    if job.texts is not None:
        for record_id, lang, text in _parse_text_rows(Path(job.texts)):
            try:
                push(record_id, "text", lang, encoder.encode_text(text))
            except ExporterError as exc:
                errors.append(f"text {record_id!r}: {exc}")

    out = Path(job.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    return ExportResult(
        model_id=encoder.model_id,
        dim=encoder.dim,
        records_written=len(lines),
        errors=errors,
    )


def export_prompts(
    encoder: Encoder, spec: PromptSpec, languages: list[str], out: Path,
    normalize: bool = False,
) -> ExportResult:
    """Render and encode the full (language, label) prompt grid.

    Record ids follow the engine's ``<dimension>/<lang>/<label>`` convention,
    so the grid loads directly as a prompt embedding set.
    """
    lines = []
    for lang in languages:
        for label, prompt in render_prompts(spec, lang):
            vec = _finish(encoder.encode_text(prompt), normalize)
            lines.append(
                _dump_line(prompt_record_id(spec.dimension, lang, label), "text", lang, vec)
            )
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    return ExportResult(
        model_id=encoder.model_id, dim=encoder.dim, records_written=len(lines)
    )
