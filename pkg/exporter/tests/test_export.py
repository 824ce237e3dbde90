"""Exporter tests, including the cross-component format contract.

The contract tests exercise the audit engine's public surfaces (embjsonl
ingestion, prompt spec schema, prompt rendering) against exporter output.
"""

import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from fairlens_exporter.cli import main
from fairlens_exporter.encoders import DevEncoder, ExporterError, load_encoder
from fairlens_exporter.export import ExportJob, export_embeddings, export_prompts
from fairlens_exporter.prompts import load_prompt_spec, render_prompts


def make_images(directory: Path, n=4, size=12) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(31))
    paths = []
    for i in range(n):
        pixels = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
        path = directory / f"img_{i:03d}.png"
        Image.fromarray(pixels).save(path)
        paths.append(path)
    return paths


def write_texts(path: Path, rows) -> Path:
    path.write_text("".join(f"{i}\t{lang}\t{t}\n" for i, lang, t in rows), encoding="utf-8")
    return path


def shipped_spec_trees():
    """The audit engine's stock prompt specs, as prompts.json trees."""
    from fairlens.zeroshot import default_prompt_specs

    trees = {}
    for name, spec in default_prompt_specs().items():
        trees[name] = {
            "dimension": spec.dimension,
            "labels": list(spec.labels),
            "templates": dict(spec.templates),
            "surfaces": {lang: dict(m) for lang, m in spec.surfaces.items()},
        }
    return trees


class TestDevEncoder:
    def test_deterministic(self, tmp_path):
        enc = DevEncoder(dim=16)
        (tmp_path / "x.bin").write_bytes(b"hello")
        a = enc.encode_image(tmp_path / "x.bin")
        b = enc.encode_image(tmp_path / "x.bin")
        assert np.array_equal(a, b)
        assert not np.array_equal(enc.encode_text("hello"), a)

    def test_model_id_parsing(self):
        enc = load_encoder("dev:32:5")
        assert isinstance(enc, DevEncoder)
        assert enc.dim == 32 and enc.seed == 5
        with pytest.raises(ExporterError):
            load_encoder("dev:banana")


class TestExportEmbeddings:
    def test_images_and_texts(self, tmp_path):
        images = make_images(tmp_path / "imgs", n=2)
        texts = write_texts(tmp_path / "texts.tsv",
                            [("t1", "en", "a dog"), ("t2", "de", "ein Hund")])
        out = tmp_path / "out.embjsonl"
        result = export_embeddings(
            ExportJob(encoder=DevEncoder(dim=8), images=images[0].parent,
                      texts=texts, out=out)
        )
        assert result.ok and result.records_written == 4
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert {rec["dim"] for rec in lines} == {8}
        kinds = [rec["kind"] for rec in lines]
        assert kinds.count("image") == 2 and kinds.count("text") == 2

    def test_reexport_is_identical(self, tmp_path):
        make_images(tmp_path / "imgs", n=3)
        out1, out2 = tmp_path / "a.embjsonl", tmp_path / "b.embjsonl"
        for out in (out1, out2):
            export_embeddings(
                ExportJob(encoder=DevEncoder(dim=8), images=tmp_path / "imgs", out=out)
            )
        assert out1.read_bytes() == out2.read_bytes()

    def test_unreadable_item_goes_to_error_ledger(self, tmp_path):
        listing = tmp_path / "list.txt"
        good = make_images(tmp_path / "imgs", n=1)[0]
        listing.write_text(f"{good}\n{tmp_path / 'missing.png'}\n", encoding="utf-8")
        out = tmp_path / "out.embjsonl"
        result = export_embeddings(
            ExportJob(encoder=DevEncoder(dim=8), images=listing, out=out)
        )
        assert not result.ok
        assert result.records_written == 1
        assert any("missing.png" in e for e in result.errors)

    def test_normalize_flag(self, tmp_path):
        make_images(tmp_path / "imgs", n=2)
        out = tmp_path / "out.embjsonl"
        export_embeddings(
            ExportJob(encoder=DevEncoder(dim=8), images=tmp_path / "imgs",
                      out=out, normalize=True)
        )
        for line in out.read_text().splitlines():
            vec = np.array(json.loads(line)["vec"])
            assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)

    def test_bad_tsv_rejected(self, tmp_path):
        texts = tmp_path / "texts.tsv"
        texts.write_text("only_two\tfields\n", encoding="utf-8")
        with pytest.raises(ExporterError):
            export_embeddings(ExportJob(encoder=DevEncoder(dim=4), texts=texts,
                                        out=tmp_path / "o.embjsonl"))

    def test_mixed_dims_go_to_error_ledger(self, tmp_path):
        from fairlens_exporter.encoders import Encoder

        class LopsidedEncoder(Encoder):
            # image and text features with different widths, as a mismatched
            # model pairing would produce
            model_id = "lopsided"
            dim = 4

            def encode_image(self, path):
                return np.ones(4)

            def encode_text(self, text):
                return np.ones(6)

        make_images(tmp_path / "imgs", n=1)
        texts = write_texts(tmp_path / "t.tsv", [("t1", "en", "hello")])
        result = export_embeddings(
            ExportJob(encoder=LopsidedEncoder(), images=tmp_path / "imgs",
                      texts=texts, out=tmp_path / "o.embjsonl")
        )
        assert not result.ok
        assert result.records_written == 1
        assert any("differs from file dim" in e for e in result.errors)


class TestContractWithAuditEngine:
    """The [secondary] acceptance contract: exporter output feeds the engine."""

    def test_export_passes_primary_ingest(self, tmp_path):
        from fairlens.ingest import load_embeddings

        # 4 images + 4 caption texts in one file
        make_images(tmp_path / "imgs", n=4)
        texts = write_texts(
            tmp_path / "texts.tsv",
            [("cap_en", "en", "a dog"), ("cap_de", "de", "ein Hund"),
             ("cap_fr", "fr", "un chien"), ("cap_ja", "ja", "inu")],
        )
        media_out = tmp_path / "media.embjsonl"
        result = export_embeddings(
            ExportJob(encoder=DevEncoder(dim=16), images=tmp_path / "imgs",
                      texts=texts, out=media_out)
        )
        assert result.ok and result.records_written == 8

        # 16 prompts: gender en+de (4), race en (7), age en (5)
        trees = shipped_spec_trees()
        trees["gender"]["templates"]["de"] = "Ein Foto: {label}"
        trees["gender"]["surfaces"]["de"] = {"female": "Frau", "male": "Mann"}
        prompt_out = tmp_path / "prompts.embjsonl"
        written = 0
        lines = []
        for name, langs in (("gender", ["en", "de"]), ("race", ["en"]), ("age", ["en"])):
            spec_path = tmp_path / f"{name}.json"
            spec_path.write_text(json.dumps(trees[name]), encoding="utf-8")
            part = tmp_path / f"{name}.embjsonl"
            res = export_prompts(DevEncoder(dim=16), load_prompt_spec(spec_path),
                                 langs, part)
            written += res.records_written
            lines.extend(part.read_text().splitlines())
        prompt_out.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        assert written == 16

        media_store = load_embeddings(media_out)
        prompt_store = load_embeddings(prompt_out)
        assert len(media_store) == 8 and not media_store.warnings
        assert len(prompt_store) == 16 and not prompt_store.warnings

    def test_prompt_grid_loads_as_embedding_set(self, tmp_path):
        from fairlens.ingest import build_prompt_embeddings, load_embeddings
        from fairlens.ingest import load_prompt_spec as engine_load_spec

        tree = shipped_spec_trees()["gender"]
        spec_path = tmp_path / "gender.json"
        spec_path.write_text(json.dumps(tree), encoding="utf-8")
        out = tmp_path / "prompts.embjsonl"
        export_prompts(DevEncoder(dim=12), load_prompt_spec(spec_path), ["en"], out)
        store = load_embeddings(out)
        prompts = build_prompt_embeddings(store, engine_load_spec(spec_path), ["en"])
        assert prompts.dim == 12
        assert prompts.labels == ("female", "male")

    def test_prompt_strings_match_engine_rendering(self, tmp_path):
        from fairlens.zeroshot import default_prompt_specs
        from fairlens.zeroshot import render_prompts as engine_render

        trees = shipped_spec_trees()
        engine_specs = default_prompt_specs()
        for name, tree in trees.items():
            spec_path = tmp_path / f"{name}.json"
            spec_path.write_text(json.dumps(tree), encoding="utf-8")
            exporter_spec = load_prompt_spec(spec_path)
            for lang in exporter_spec.languages:
                assert render_prompts(exporter_spec, lang) == engine_render(
                    engine_specs[name], lang
                ), f"{name}/{lang}"
        print("\nPASS: exporter contract (ingest-clean output, identical prompt strings)")


class TestCli:
    def test_export_command(self, tmp_path):
        make_images(tmp_path / "imgs", n=2)
        out = tmp_path / "out.embjsonl"
        code = main(["export", "--model", "dev:8", "--images", str(tmp_path / "imgs"),
                     "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 2

    def test_export_prompts_command(self, tmp_path):
        tree = shipped_spec_trees()["age"]
        spec_path = tmp_path / "age.json"
        spec_path.write_text(json.dumps(tree), encoding="utf-8")
        out = tmp_path / "prompts.embjsonl"
        code = main(["export-prompts", "--model", "dev:8", "--spec", str(spec_path),
                     "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 5

    def test_nothing_to_export_is_usage_error(self, tmp_path):
        assert main(["export", "--model", "dev:8", "--out", str(tmp_path / "o")]) == 64

    def test_failed_items_exit_nonzero(self, tmp_path):
        listing = tmp_path / "list.txt"
        listing.write_text(str(tmp_path / "missing.png") + "\n", encoding="utf-8")
        code = main(["export", "--model", "dev:8", "--images", str(listing),
                     "--out", str(tmp_path / "o.embjsonl")])
        assert code == 1


def test_real_checkpoint_roundtrip(tmp_path):
    """Same contract against a real checkpoint, when one is obtainable."""
    from fairlens.ingest import load_embeddings

    try:
        encoder = load_encoder("sentence-transformers/clip-ViT-B-32-multilingual-v1",
                               image_model_id="clip-ViT-B-32")
    except ExporterError as exc:
        pytest.skip(f"no checkpoint available in this environment: {exc}")
    make_images(tmp_path / "imgs", n=2)
    out = tmp_path / "real.embjsonl"
    result = export_embeddings(ExportJob(encoder=encoder, images=tmp_path / "imgs", out=out))
    assert result.ok
    assert len(load_embeddings(out)) == 2
