"""Zero-shot classification of image embeddings against label prompts.

Prompt strings and prompt embeddings are deliberately decoupled: this module
renders strings from templates and classifies against embeddings supplied
through the ingestion format, but never runs a text encoder itself, so the
audit engine stays model-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DimensionError, ManifestError, PromptSpecError
from .groups import GroupLabel, OutcomeRecord, OutcomeSet
from .vectors import Vector, argmax_similarity

__all__ = [
    "PromptSpec",
    "PromptEmbeddingSet",
    "render_prompts",
    "classify",
    "run_zeroshot",
    "default_prompt_specs",
    "prompt_record_id",
]

_SLOT = "{label}"


@dataclass(frozen=True)
class PromptSpec:
    """Label set plus per-language templates and label surface forms.

    Each template contains exactly one ``{label}`` slot; every label must have
    a surface form in every declared language. Label order is the canonical
    tie-breaking order for classification.
    """

    dimension: str
    labels: tuple[str, ...]
    templates: Mapping[str, str]
    surfaces: Mapping[str, Mapping[str, str]]

    def __post_init__(self) -> None:
        if not self.dimension:
            raise PromptSpecError("prompt spec needs a dimension name")
        if len(self.labels) < 2:
            raise PromptSpecError("prompt spec needs at least 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise PromptSpecError("prompt spec labels must be distinct")
        object.__setattr__(self, "labels", tuple(self.labels))
        for lang, template in self.templates.items():
            if template.count(_SLOT) != 1:
                raise PromptSpecError(
                    f"template for {lang!r} must contain exactly one {_SLOT} slot"
                )
            lang_surfaces = self.surfaces.get(lang, {})
            missing = [lbl for lbl in self.labels if lbl not in lang_surfaces]
            if missing:
                raise PromptSpecError(
                    f"missing surface forms for {lang!r}: {', '.join(missing)}"
                )

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(self.templates)


@dataclass(frozen=True)
class PromptEmbeddingSet:
    """Prompt embeddings on a complete (language, label) grid, all one dim.

    Carries the spec's label order so classification ties break
    deterministically to the first listed label.
    """

    dimension: str
    labels: tuple[str, ...]
    languages: tuple[str, ...]
    entries: Mapping[tuple[str, str], Vector]

    def __post_init__(self) -> None:
        dims = set()
        for lang in self.languages:
            for label in self.labels:
                vec = self.entries.get((lang, label))
                if vec is None:
                    raise PromptSpecError(
                        f"missing prompt embedding for ({lang!r}, {label!r})"
                    )
                dims.add(vec.dim)
        if len(dims) > 1:
            raise DimensionError(f"prompt embeddings mix dimensions {sorted(dims)}")

    @property
    def dim(self) -> int:
        return next(iter(self.entries.values())).dim


def prompt_record_id(dimension: str, lang: str, label: str) -> str:
    """Embedding-store id convention for prompt vectors."""
    return f"{dimension}/{lang}/{label}"


def render_prompts(spec: PromptSpec, language: str) -> list[tuple[str, str]]:
    """Render (label, prompt string) pairs for one language, label order preserved."""
    template = spec.templates.get(language)
    if template is None:
        raise PromptSpecError(f"language {language!r} not declared in prompt spec")
    surfaces = spec.surfaces[language]
    rendered = []
    for label in spec.labels:
        surface = surfaces.get(label)
        if surface is None:
            raise PromptSpecError(f"missing surface form for ({language!r}, {label!r})")
        rendered.append((label, template.replace(_SLOT, surface)))
    return rendered


def classify(image: Vector, prompts: PromptEmbeddingSet, language: str) -> str:
    """Label whose prompt embedding is most cosine-similar to the image."""
    if language not in prompts.languages:
        raise PromptSpecError(f"no prompt embeddings for language {language!r}")
    candidates = [prompts.entries[(language, label)] for label in prompts.labels]
    return prompts.labels[argmax_similarity(image, candidates)]


def run_zeroshot(
    images: Sequence[tuple[str, Vector, Iterable[GroupLabel]]],
    prompts: PromptEmbeddingSet,
    spec: PromptSpec,
    truth: Mapping[str, str],
    languages: Sequence[str],
    taxonomy: Mapping[str, Sequence[str]] | None = None,
) -> OutcomeSet:
    """Classify every image in every language against the ground truth.

    Produces one outcome record per (image, language); feeds the group audit
    directly. Every image needs a truth label drawn from the spec's labels.
    """
    label_set = set(spec.labels)
    for item_id, _, _ in images:
        expected = truth.get(item_id)
        if expected is None:
            raise ManifestError(f"no truth label for image {item_id!r}")
        if expected not in label_set:
            raise ManifestError(
                f"truth label {expected!r} for image {item_id!r} is not in the prompt labels"
            )
    records = []
    for lang in languages:
        for item_id, vec, groups in images:
            predicted = classify(vec, prompts, lang)
            records.append(
                OutcomeRecord(
                    item_id=item_id,
                    lang=lang,
                    groups=frozenset(groups),
                    correct=predicted == truth[item_id],
                )
            )
    return OutcomeSet(records, taxonomy=taxonomy)


def default_prompt_specs() -> dict[str, PromptSpec]:
    """The stock gender/race/age prompt specs with English surface forms.

    Surface forms for other languages are data, not code; extend via
    prompts.json files.
    """
    gender = PromptSpec(
        dimension="gender",
        labels=("female", "male"),
        templates={"en": "A photo of a {label}"},
        surfaces={"en": {"female": "woman", "male": "man"}},
    )
    race_labels = (
        "White",
        "Black",
        "Indian",
        "East Asian",
        "Southeast Asian",
        "Middle Eastern",
        "Latino",
    )
    race_surfaces = {label: label for label in race_labels}
    # "Indian" in the face-attribute taxonomy means South Asian but can also
    # read as Native American; the prompt uses a disambiguating surface form.
    race_surfaces["Indian"] = "South Eastern"
    race = PromptSpec(
        dimension="race",
        labels=race_labels,
        templates={"en": "A photo of a(n) {label} person"},
        surfaces={"en": race_surfaces},
    )
    age = PromptSpec(
        dimension="age",
        labels=("0-2", "3-19", "20-49", "50-69", "70+"),
        templates={"en": "A photo of a person aged {label} years"},
        surfaces={
            "en": {
                "0-2": "0 to 2",
                "3-19": "3 to 19",
                "20-49": "20 to 49",
                "50-69": "50 to 69",
                "70+": "more than 70",
            }
        },
    )
    return {"gender": gender, "race": race, "age": age}
