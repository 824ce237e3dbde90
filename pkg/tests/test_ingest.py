import json

import numpy as np
import pytest

from fairlens.errors import (
    DanglingReferenceError,
    DuplicateIdError,
    EmbeddingFileError,
    InvalidVectorError,
    ManifestError,
    MissingLanguageError,
    ParseError,
    PromptSpecError,
    TaxonomyError,
)
from fairlens.groups import GroupLabel
from fairlens.ingest import (
    EmbeddingRecord,
    assemble_triples,
    build_prompt_embeddings,
    dumps_record,
    load_embeddings,
    load_manifest,
    load_prompt_spec,
    manifest_image_items,
    resolve_truth,
    save_embeddings,
    store_from_records,
)
from fairlens.vectors import Vector

from .conftest import write_json


def make_records(rng, n=20, dim=6):
    records = []
    for i in range(n):
        kind = "image" if i % 2 == 0 else "text"
        lang = None if kind == "image" else ("en", "de", "fr")[i % 3]
        records.append(
            EmbeddingRecord(f"rec_{i:04d}", kind, lang, Vector(rng.standard_normal(dim)))
        )
    return records


class TestEmbeddingFile:
    def test_roundtrip_bytes(self, tmp_path, rng):
        path = tmp_path / "e.embjsonl"
        save_embeddings(make_records(rng, n=50), path)
        original = path.read_bytes()
        store = load_embeddings(path)
        path2 = tmp_path / "e2.embjsonl"
        save_embeddings(store, path2)
        assert path2.read_bytes() == original

    def test_roundtrip_exact_vectors(self, tmp_path, rng):
        records = make_records(rng, n=30)
        path = tmp_path / "e.embjsonl"
        save_embeddings(records, path)
        store = load_embeddings(path)
        for rec in records:
            loaded = store.get(rec.id)
            assert np.array_equal(loaded.vec.values, rec.vec.values)
            assert loaded.kind == rec.kind and loaded.lang == rec.lang

    def test_empty_file_warns(self, tmp_path):
        path = tmp_path / "empty.embjsonl"
        path.write_text("", encoding="utf-8")
        store = load_embeddings(path)
        assert len(store) == 0
        assert store.warnings

    def test_nan_component_rejected(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"x","kind":"image","lang":null,"dim":2,"vec":[NaN,1.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(InvalidVectorError):
            load_embeddings(path)

    def test_infinity_rejected(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"x","kind":"image","lang":null,"dim":2,"vec":[Infinity,1.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(InvalidVectorError):
            load_embeddings(path)

    def test_dim_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"x","kind":"image","lang":null,"dim":3,"vec":[1.0,2.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(InvalidVectorError):
            load_embeddings(path)

    def test_duplicate_id_rejected(self, tmp_path):
        line = '{"id":"x","kind":"image","lang":null,"dim":1,"vec":[1.0]}\n'
        path = tmp_path / "dup.embjsonl"
        path.write_text(line + line, encoding="utf-8")
        with pytest.raises(DuplicateIdError):
            load_embeddings(path)

    def test_invalid_json_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"a","kind":"image","lang":null,"dim":1,"vec":[1.0]}\nnot json\n',
            encoding="utf-8",
        )
        with pytest.raises(ParseError) as exc:
            load_embeddings(path)
        assert exc.value.line == 2

    def test_validation_is_total(self, tmp_path):
        lines = [
            '{"id":"a","kind":"image","lang":null,"dim":1,"vec":[1.0]}',
            '{"id":"b","kind":"image","lang":null,"dim":2,"vec":[1.0]}',
            "garbage",
            '{"id":"a","kind":"image","lang":null,"dim":1,"vec":[2.0]}',
        ]
        path = tmp_path / "multi.embjsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(EmbeddingFileError) as exc:
            load_embeddings(path)
        assert len(exc.value.errors) == 3

    def test_bad_lang_tag(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"x","kind":"text","lang":"English","dim":1,"vec":[1.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(ParseError):
            load_embeddings(path)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "bad.embjsonl"
        path.write_text(
            '{"id":"x","kind":"image","lang":null,"dim":1,"vec":[1.0],"extra":1}\n',
            encoding="utf-8",
        )
        with pytest.raises(ParseError):
            load_embeddings(path)

    def test_dumps_record_key_order(self, rng):
        rec = make_records(rng, n=1)[0]
        keys = list(json.loads(dumps_record(rec)))
        assert keys == ["id", "kind", "lang", "dim", "vec"]


def bilingual_store(rng, n=3, dim=4):
    records = []
    for i in range(n):
        records.append(EmbeddingRecord(f"img{i}", "image", None, Vector(rng.standard_normal(dim))))
        records.append(EmbeddingRecord(f"en{i}", "text", "en", Vector(rng.standard_normal(dim))))
        records.append(EmbeddingRecord(f"de{i}", "text", "de", Vector(rng.standard_normal(dim))))
    return store_from_records(records)


class TestManifest:
    def test_caption_pairing_shaped(self, tmp_path, rng):
        store = bilingual_store(rng)
        path = write_json(
            tmp_path / "m.json",
            {
                "portion_tag": "translation",
                "pairs": [
                    {"image_id": f"img{i}", "texts": {"en": f"en{i}", "de": f"de{i}"}}
                    for i in range(3)
                ],
            },
        )
        manifest = load_manifest(path, store)
        assert manifest.portion_tag == "translation"
        triples = assemble_triples(manifest, store)
        assert len(triples) == 3
        assert [t.image_id for t in triples] == ["img0", "img1", "img2"]
        assert triples[0].portion_tag == "translation"

    def test_face_attribute_shaped(self, tmp_path, rng):
        store = store_from_records(
            [EmbeddingRecord(f"face{i}", "image", None, Vector(rng.standard_normal(4)))
             for i in range(2)]
        )
        path = write_json(
            tmp_path / "m.json",
            {
                "taxonomy": {
                    "gender": ["female", "male"],
                    "race": ["White", "Black"],
                    "age": ["0-2", "3-19", "20-49", "50-69", "70+"],
                },
                "groups": {
                    "face0": {"gender": "female", "race": "Black", "age": "20-49"},
                    "face1": {"gender": "male", "race": "White", "age": "70+"},
                },
                "truth": {"face0": "female", "face1": "male"},
            },
        )
        manifest = load_manifest(path, store)
        assert len(manifest.taxonomy) == 3
        assert manifest.groups["face0"] == frozenset(
            {GroupLabel("gender", "female"), GroupLabel("race", "Black"),
             GroupLabel("age", "20-49")}
        )
        items = manifest_image_items(manifest, store)
        assert [i[0] for i in items] == ["face0", "face1"]

    def test_dangling_text_reference(self, tmp_path, rng):
        store = bilingual_store(rng, n=1)
        path = write_json(
            tmp_path / "m.json",
            {"pairs": [{"image_id": "img0", "texts": {"en": "en0", "de": "missing"}}]},
        )
        with pytest.raises(DanglingReferenceError):
            load_manifest(path, store)

    def test_single_language_pair_rejected_at_assembly(self, tmp_path, rng):
        store = bilingual_store(rng, n=1)
        path = write_json(
            tmp_path / "m.json", {"pairs": [{"image_id": "img0", "texts": {"en": "en0"}}]}
        )
        manifest = load_manifest(path, store)
        with pytest.raises(MissingLanguageError):
            assemble_triples(manifest, store)

    def test_lang_field_mismatch(self, tmp_path, rng):
        store = bilingual_store(rng, n=1)
        path = write_json(
            tmp_path / "m.json",
            {"pairs": [{"image_id": "img0", "texts": {"fr": "en0"}}]},
        )
        with pytest.raises(ManifestError):
            load_manifest(path, store)

    def test_group_label_outside_taxonomy(self, tmp_path, rng):
        store = bilingual_store(rng, n=1)
        path = write_json(
            tmp_path / "m.json",
            {
                "taxonomy": {"gender": ["female", "male"]},
                "groups": {"img0": {"gender": "other"}},
            },
        )
        with pytest.raises(TaxonomyError):
            load_manifest(path, store)

    def test_ragged_languages_flagged(self, tmp_path, rng):
        store = bilingual_store(rng, n=2)
        path = write_json(
            tmp_path / "m.json",
            {
                "pairs": [
                    {"image_id": "img0", "texts": {"en": "en0", "de": "de0"}},
                    {"image_id": "img1", "texts": {"en": "en1"}},
                ]
            },
        )
        manifest = load_manifest(path, store)
        assert manifest.ragged_languages
        assert manifest.warnings

    def test_kind_mismatch(self, tmp_path, rng):
        store = bilingual_store(rng, n=1)
        path = write_json(
            tmp_path / "m.json",
            {"pairs": [{"image_id": "en0", "texts": {"en": "en0", "de": "de0"}}]},
        )
        with pytest.raises(ManifestError):
            load_manifest(path, store)

    def test_truth_resolution_falls_back_to_groups(self, tmp_path, rng):
        store = store_from_records(
            [EmbeddingRecord("face0", "image", None, Vector(rng.standard_normal(4)))]
        )
        path = write_json(
            tmp_path / "m.json",
            {
                "taxonomy": {"gender": ["female", "male"]},
                "groups": {"face0": {"gender": "male"}},
            },
        )
        manifest = load_manifest(path, store)
        spec = load_prompt_spec(
            write_json(
                tmp_path / "p.json",
                {
                    "dimension": "gender",
                    "labels": ["female", "male"],
                    "templates": {"en": "A photo of a {label}"},
                    "surfaces": {"en": {"female": "woman", "male": "man"}},
                },
            )
        )
        assert resolve_truth(manifest, spec) == {"face0": "male"}


class TestPromptIngestion:
    def test_load_prompt_spec(self, tmp_path):
        path = write_json(
            tmp_path / "p.json",
            {
                "dimension": "gender",
                "labels": ["female", "male"],
                "templates": {"en": "A photo of a {label}"},
                "surfaces": {"en": {"female": "woman", "male": "man"}},
            },
        )
        spec = load_prompt_spec(path)
        assert spec.dimension == "gender"
        assert spec.labels == ("female", "male")

    def test_missing_key(self, tmp_path):
        path = write_json(tmp_path / "p.json", {"dimension": "gender"})
        with pytest.raises(PromptSpecError):
            load_prompt_spec(path)

    def test_build_prompt_embeddings(self, tmp_path, rng):
        spec = load_prompt_spec(
            write_json(
                tmp_path / "p.json",
                {
                    "dimension": "gender",
                    "labels": ["female", "male"],
                    "templates": {"en": "A {label}", "de": "Ein {label}"},
                    "surfaces": {
                        "en": {"female": "woman", "male": "man"},
                        "de": {"female": "Frau", "male": "Mann"},
                    },
                },
            )
        )
        records = [
            EmbeddingRecord(f"gender/{lang}/{label}", "text", lang,
                            Vector(rng.standard_normal(4)))
            for lang in ("en", "de")
            for label in ("female", "male")
        ]
        store = store_from_records(records)
        prompts = build_prompt_embeddings(store, spec, ["en", "de"])
        assert prompts.dim == 4
        assert set(prompts.entries) == {
            (lang, label) for lang in ("en", "de") for label in ("female", "male")
        }

    def test_missing_grid_entry(self, tmp_path, rng):
        spec = load_prompt_spec(
            write_json(
                tmp_path / "p.json",
                {
                    "dimension": "gender",
                    "labels": ["female", "male"],
                    "templates": {"ja": "{label}"},
                    "surfaces": {"ja": {"female": "f", "male": "m"}},
                },
            )
        )
        store = store_from_records(
            [EmbeddingRecord("gender/ja/male", "text", "ja", Vector(rng.standard_normal(4)))]
        )
        with pytest.raises(PromptSpecError, match="female"):
            build_prompt_embeddings(store, spec, ["ja"])
