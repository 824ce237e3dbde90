"""Parsing and validation of embedding files, manifests, and prompt specs.

File formats
------------

Embeddings (``*.embjsonl``): one JSON object per line, keys in this order::

    {"id":"img_0001","kind":"image","lang":null,"dim":4,"vec":[0.1,0.2,0.3,0.4]}
    {"id":"cap_0001_de","kind":"text","lang":"de","dim":4,"vec":[...]}

Floats are serialized with round-trip-exact shortest decimals, so files
written by :func:`save_embeddings` reload to bit-identical vectors and
re-serialize byte-identically. Parsing is streaming (O(1 record) memory) and
total: the whole file is scanned and every problem is reported with its line
number before anything is rejected.

Manifest (``manifest.json``)::

    {
      "portion_tag": "translation",
      "taxonomy": {"gender": ["female", "male"]},
      "pairs": [{"image_id": "img_0001", "texts": {"en": "cap_en", "de": "cap_de"}}],
      "groups": {"img_0001": {"gender": "female"}},
      "truth":  {"img_0001": "female"}
    }

Prompt spec (``prompts.json``)::

    {
      "dimension": "gender",
      "labels": ["female", "male"],
      "templates": {"en": "A photo of a {label}"},
      "surfaces": {"en": {"female": "woman", "male": "man"}}
    }

Prompt embeddings live in ordinary embedding files under the id convention
``<dimension>/<lang>/<label>`` with ``kind`` = "text" and the ``lang`` field
set.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import (
    DanglingReferenceError,
    DimensionError,
    DuplicateIdError,
    EmbeddingFileError,
    FairlensError,
    InvalidVectorError,
    ManifestError,
    MissingLanguageError,
    ParseError,
    PromptSpecError,
    TaxonomyError,
)
from .groups import GroupLabel
from .individual import GroundedTriple
from .vectors import Vector
from .zeroshot import PromptEmbeddingSet, PromptSpec, prompt_record_id

__all__ = [
    "EmbeddingRecord",
    "EmbeddingStore",
    "ManifestPair",
    "PairManifest",
    "build_record",
    "dumps_record",
    "load_embeddings",
    "save_embeddings",
    "store_from_records",
    "parse_manifest",
    "load_manifest",
    "assemble_triples",
    "parse_prompt_spec",
    "load_prompt_spec",
    "build_prompt_embeddings",
    "manifest_image_items",
    "resolve_truth",
]

_KINDS = ("image", "text")
_LANG_RE = re.compile(r"^[a-z]{2,3}$")
_RECORD_KEYS = ("id", "kind", "lang", "dim", "vec")


@dataclass(frozen=True)
class EmbeddingRecord:
    """One id-tagged embedding vector."""

    id: str
    kind: str
    lang: str | None
    vec: Vector

    @property
    def dim(self) -> int:
        return self.vec.dim


@dataclass
class EmbeddingStore:
    """Validated, insertion-ordered embedding records keyed by id."""

    records: dict[str, EmbeddingRecord] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        return iter(self.records.values())

    def get(self, record_id: str) -> EmbeddingRecord | None:
        return self.records.get(record_id)

    def require(self, record_id: str, context: str = "") -> EmbeddingRecord:
        rec = self.records.get(record_id)
        if rec is None:
            raise DanglingReferenceError(record_id, context)
        return rec


def build_record(
    record_id, kind, lang, dim, vec, line: int | None = None
) -> EmbeddingRecord:
    """Validate raw field values into an EmbeddingRecord (shared by file and API ingestion)."""
    if not isinstance(record_id, str) or not record_id:
        raise ParseError("'id' must be a non-empty string", line)
    if kind not in _KINDS:
        raise ParseError(f"'kind' must be one of {_KINDS}, got {kind!r}", line)
    if lang is not None:
        if not isinstance(lang, str) or not _LANG_RE.match(lang):
            raise ParseError(
                f"'lang' must be a lowercase 2-3 letter tag or null, got {lang!r}", line
            )
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError(f"'dim' must be a positive integer, got {dim!r}", line)
    if not isinstance(vec, list):
        raise ParseError("'vec' must be an array of numbers", line)
    if len(vec) != dim:
        raise InvalidVectorError(
            f"record {record_id!r}: dim={dim} but vec has {len(vec)} components",
            record_id=record_id,
            line=line,
        )
    for x in vec:
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise ParseError(f"record {record_id!r}: non-numeric vec component {x!r}", line)
    try:
        vector = Vector(vec)
    except InvalidVectorError as exc:
        raise InvalidVectorError(
            f"record {record_id!r}: {exc}", record_id=record_id, line=line
        ) from None
    return EmbeddingRecord(id=record_id, kind=kind, lang=lang, vec=vector)


def _parse_line(line: str, lineno: int) -> EmbeddingRecord:
    try:
        # Route NaN/Infinity literals through float() so they surface as
        # vector-content errors, not JSON syntax errors.
        obj = json.loads(line, parse_constant=float)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object", lineno)
    missing = [k for k in _RECORD_KEYS if k not in obj]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}", lineno)
    unknown = [k for k in obj if k not in _RECORD_KEYS]
    if unknown:
        raise ParseError(f"unknown keys: {', '.join(unknown)}", lineno)
    return build_record(obj["id"], obj["kind"], obj["lang"], obj["dim"], obj["vec"], lineno)


def store_from_records(records: Iterable[EmbeddingRecord]) -> EmbeddingStore:
    """Assemble a store, rejecting duplicate ids."""
    store = EmbeddingStore()
    for rec in records:
        if rec.id in store.records:
            raise DuplicateIdError(rec.id)
        store.records[rec.id] = rec
    return store


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Load and validate an embjsonl file.

    Scans the whole file; if any line fails, raises the single error or an
    EmbeddingFileError aggregating all of them. An empty file yields an empty
    store with a warning.
    """
    path = Path(path)
    store = EmbeddingStore()
    errors: list[FairlensError] = []
    with path.open("r", encoding="utf-8") as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            try:
                rec = _parse_line(line, lineno)
                if rec.id in store.records:
                    raise DuplicateIdError(rec.id, lineno)
                store.records[rec.id] = rec
            except FairlensError as exc:
                errors.append(exc)
        if lineno == 0:
            store.warnings.append(f"{path}: empty embedding file")
    if len(errors) == 1:
        raise errors[0]
    if errors:
        raise EmbeddingFileError(errors)
    return store


def dumps_record(rec: EmbeddingRecord) -> str:
    """Canonical one-line serialization (fixed key order, shortest round-trip floats)."""
    obj = {
        "id": rec.id,
        "kind": rec.kind,
        "lang": rec.lang,
        "dim": rec.dim,
        "vec": rec.vec.values.tolist(),
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def save_embeddings(store: EmbeddingStore | Iterable[EmbeddingRecord], path: str | Path) -> None:
    """Write records in canonical form, one per line."""
    records = store if isinstance(store, EmbeddingStore) else list(store)
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dumps_record(rec))
            fh.write("\n")


@dataclass(frozen=True)
class ManifestPair:
    """One image paired with text ids per language."""

    image_id: str
    texts: Mapping[str, str]


@dataclass
class PairManifest:
    """Ground-truth pairing plus group labels and truth labels."""

    pairs: tuple[ManifestPair, ...]
    portion_tag: str | None
    taxonomy: dict[str, tuple[str, ...]]
    groups: dict[str, frozenset[GroupLabel]]
    truth: dict[str, str]
    warnings: list[str] = field(default_factory=list)

    @property
    def ragged_languages(self) -> bool:
        lang_sets = {frozenset(p.texts) for p in self.pairs}
        return len(lang_sets) > 1


def _require_mapping(obj, what: str) -> dict:
    if not isinstance(obj, dict):
        raise ManifestError(f"{what} must be a JSON object")
    return obj


def parse_manifest(obj: dict, store: EmbeddingStore) -> PairManifest:
    """Validate a manifest tree against an embedding store."""
    obj = _require_mapping(obj, "manifest")
    warnings: list[str] = []

    portion_tag = obj.get("portion_tag")
    if portion_tag is not None and not isinstance(portion_tag, str):
        raise ManifestError("'portion_tag' must be a string or null")

    taxonomy_obj = _require_mapping(obj.get("taxonomy", {}), "'taxonomy'")
    taxonomy: dict[str, tuple[str, ...]] = {}
    for dim, values in taxonomy_obj.items():
        if not isinstance(values, list) or not all(isinstance(v, str) and v for v in values):
            raise ManifestError(f"taxonomy dimension {dim!r} must list non-empty strings")
        if len(set(values)) != len(values):
            raise ManifestError(f"taxonomy dimension {dim!r} has duplicate values")
        taxonomy[dim] = tuple(values)

    pairs: list[ManifestPair] = []
    for i, pair_obj in enumerate(obj.get("pairs", [])):
        pair_obj = _require_mapping(pair_obj, f"pairs[{i}]")
        image_id = pair_obj.get("image_id")
        if not isinstance(image_id, str) or not image_id:
            raise ManifestError(f"pairs[{i}]: 'image_id' must be a non-empty string")
        image_rec = store.require(image_id, f"pairs[{i}].image_id")
        if image_rec.kind != "image":
            raise ManifestError(f"pairs[{i}]: {image_id!r} is not an image record")
        texts_obj = _require_mapping(pair_obj.get("texts"), f"pairs[{i}].texts")
        texts: dict[str, str] = {}
        for lang, text_id in texts_obj.items():
            if not _LANG_RE.match(lang):
                raise ManifestError(f"pairs[{i}]: invalid language tag {lang!r}")
            text_rec = store.require(text_id, f"pairs[{i}].texts[{lang}]")
            if text_rec.kind != "text":
                raise ManifestError(f"pairs[{i}]: {text_id!r} is not a text record")
            if text_rec.lang is not None and text_rec.lang != lang:
                raise ManifestError(
                    f"pairs[{i}]: record {text_id!r} is tagged {text_rec.lang!r}, "
                    f"manifest says {lang!r}"
                )
            texts[lang] = text_id
        pairs.append(ManifestPair(image_id=image_id, texts=texts))

    lang_sets = {frozenset(p.texts) for p in pairs}
    if len(lang_sets) > 1:
        warnings.append("pairs declare inconsistent language sets (ragged manifest)")

    groups: dict[str, frozenset[GroupLabel]] = {}
    for image_id, labels_obj in _require_mapping(obj.get("groups", {}), "'groups'").items():
        store.require(image_id, "groups key")
        labels_obj = _require_mapping(labels_obj, f"groups[{image_id}]")
        labels = set()
        for dim, value in labels_obj.items():
            if dim not in taxonomy:
                raise TaxonomyError(f"groups[{image_id}]: undeclared dimension {dim!r}")
            if value not in taxonomy[dim]:
                raise TaxonomyError(
                    f"groups[{image_id}]: value {value!r} not in taxonomy[{dim!r}]"
                )
            labels.add(GroupLabel(dim, value))
        groups[image_id] = frozenset(labels)

    truth: dict[str, str] = {}
    for image_id, label in _require_mapping(obj.get("truth", {}), "'truth'").items():
        store.require(image_id, "truth key")
        if not isinstance(label, str) or not label:
            raise ManifestError(f"truth[{image_id}]: label must be a non-empty string")
        truth[image_id] = label

    return PairManifest(
        pairs=tuple(pairs),
        portion_tag=portion_tag,
        taxonomy=taxonomy,
        groups=groups,
        truth=truth,
        warnings=warnings,
    )


def load_manifest(path: str | Path, store: EmbeddingStore) -> PairManifest:
    """Load and validate a manifest.json against the store."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", exc.lineno) from None
    return parse_manifest(obj, store)


def assemble_triples(manifest: PairManifest, store: EmbeddingStore) -> list[GroundedTriple]:
    """Resolve manifest pairs into grounded triples, manifest order preserved."""
    triples = []
    for i, pair in enumerate(manifest.pairs):
        if len(pair.texts) < 2:
            raise MissingLanguageError(
                f"pairs[{i}] ({pair.image_id!r}): need captions in at least 2 languages"
            )
        image = store.require(pair.image_id).vec
        texts = {lang: store.require(tid).vec for lang, tid in pair.texts.items()}
        dims = {image.dim} | {v.dim for v in texts.values()}
        if len(dims) != 1:
            raise DimensionError(
                f"pairs[{i}] ({pair.image_id!r}): mixed dimensions {sorted(dims)}"
            )
        triples.append(
            GroundedTriple(
                image_id=pair.image_id,
                image_vec=image,
                text_vec_by_lang=texts,
                portion_tag=manifest.portion_tag or "",
            )
        )
    return triples


def parse_prompt_spec(obj: dict) -> PromptSpec:
    """Validate a prompts.json tree into a PromptSpec."""
    obj = _require_mapping(obj, "prompt spec")
    try:
        dimension = obj["dimension"]
        labels = obj["labels"]
        templates = obj["templates"]
        surfaces = obj["surfaces"]
    except KeyError as exc:
        raise PromptSpecError(f"prompt spec missing key {exc.args[0]!r}") from None
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise PromptSpecError("'labels' must be an array of strings")
    if not isinstance(templates, dict) or not isinstance(surfaces, dict):
        raise PromptSpecError("'templates' and 'surfaces' must be objects")
    for lang in templates:
        if not _LANG_RE.match(lang):
            raise PromptSpecError(f"invalid language tag {lang!r} in templates")
    return PromptSpec(
        dimension=dimension,
        labels=tuple(labels),
        templates=dict(templates),
        surfaces={lang: dict(m) for lang, m in surfaces.items()},
    )


def load_prompt_spec(path: str | Path) -> PromptSpec:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", exc.lineno) from None
    return parse_prompt_spec(obj)


def build_prompt_embeddings(
    store: EmbeddingStore, spec: PromptSpec, languages: Iterable[str]
) -> PromptEmbeddingSet:
    """Collect prompt vectors for the (language, label) grid from a store.

    Records are looked up by the ``<dimension>/<lang>/<label>`` id convention;
    any hole in the grid is a PromptSpecError.
    """
    languages = tuple(languages)
    entries: dict[tuple[str, str], Vector] = {}
    dims = set()
    for lang in languages:
        for label in spec.labels:
            rid = prompt_record_id(spec.dimension, lang, label)
            rec = store.get(rid)
            if rec is None:
                raise PromptSpecError(
                    f"missing prompt embedding for ({lang!r}, {label!r}) (expected id {rid!r})"
                )
            if rec.kind != "text":
                raise PromptSpecError(f"prompt record {rid!r} must have kind 'text'")
            entries[(lang, label)] = rec.vec
            dims.add(rec.vec.dim)
    if len(dims) > 1:
        raise DimensionError(f"prompt embeddings mix dimensions {sorted(dims)}")
    return PromptEmbeddingSet(
        dimension=spec.dimension,
        labels=spec.labels,
        languages=languages,
        entries=entries,
    )


def manifest_image_items(
    manifest: PairManifest, store: EmbeddingStore
) -> list[tuple[str, Vector, frozenset[GroupLabel]]]:
    """Image cohort for zero-shot audits: groups{} order, else truth{} order."""
    ids = list(manifest.groups) if manifest.groups else list(manifest.truth)
    items = []
    for image_id in ids:
        rec = store.require(image_id, "zero-shot cohort")
        if rec.kind != "image":
            raise ManifestError(f"{image_id!r} is not an image record")
        items.append((image_id, rec.vec, manifest.groups.get(image_id, frozenset())))
    return items


def resolve_truth(manifest: PairManifest, spec: PromptSpec) -> dict[str, str]:
    """Truth labels for the spec's dimension.

    Explicit truth{} entries win; otherwise the image's group label of the
    same dimension is the truth (the label is recorded once, not twice).
    """
    truth = dict(manifest.truth)
    if truth:
        return truth
    for image_id, labels in manifest.groups.items():
        for label in labels:
            if label.dimension == spec.dimension:
                truth[image_id] = label.value
                break
    return truth
