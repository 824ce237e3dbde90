"""Prompt spec loading and rendering against the audit engine's file contract.

The prompts.json schema and the substitution rule (exactly one ``{label}``
slot, surface form substituted verbatim, label order preserved) are part of
the engine's public interface; this module re-implements them so the exporter
stays decoupled from the engine package while producing identical strings.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .encoders import ExporterError

__all__ = ["PromptSpec", "load_prompt_spec", "render_prompts", "prompt_record_id"]

_SLOT = "{label}"
_LANG_RE = re.compile(r"^[a-z]{2,3}$")


@dataclass(frozen=True)
class PromptSpec:
    dimension: str
    labels: tuple[str, ...]
    templates: dict[str, str]
    surfaces: dict[str, dict[str, str]]

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(self.templates)


def load_prompt_spec(path: str | Path) -> PromptSpec:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ExporterError(f"{path}: invalid JSON: {exc.msg}") from None
    try:
        spec = PromptSpec(
            dimension=obj["dimension"],
            labels=tuple(obj["labels"]),
            templates=dict(obj["templates"]),
            surfaces={lang: dict(m) for lang, m in obj["surfaces"].items()},
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise ExporterError(f"{path}: malformed prompt spec: {exc}") from None
    for lang, template in spec.templates.items():
        if not _LANG_RE.match(lang):
            raise ExporterError(f"invalid language tag {lang!r}")
        if template.count(_SLOT) != 1:
            raise ExporterError(f"template for {lang!r} must contain exactly one {_SLOT}")
        missing = [l for l in spec.labels if l not in spec.surfaces.get(lang, {})]
        if missing:
            raise ExporterError(f"missing surface forms for {lang!r}: {', '.join(missing)}")
    return spec


def render_prompts(spec: PromptSpec, language: str) -> list[tuple[str, str]]:
    """(label, prompt string) pairs, identical to the audit engine's rendering."""
    if language not in spec.templates:
        raise ExporterError(f"language {language!r} not declared in prompt spec")
    template = spec.templates[language]
    return [
        (label, template.replace(_SLOT, spec.surfaces[language][label]))
        for label in spec.labels
    ]


def prompt_record_id(dimension: str, lang: str, label: str) -> str:
    return f"{dimension}/{lang}/{label}"
