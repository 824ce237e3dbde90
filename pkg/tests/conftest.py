"""Shared fixtures and independent brute-force oracles.

The oracles here are deliberately written in plain Python (math module, loops)
so they share no code path with the numpy-backed engine they check.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from fairlens.ingest import EmbeddingRecord, save_embeddings
from fairlens.vectors import Vector


def brute_cosine(xs, ys) -> float:
    dot = sum(x * y for x, y in zip(xs, ys))
    nx = math.sqrt(sum(x * x for x in xs))
    ny = math.sqrt(sum(y * y for y in ys))
    raw = dot / (nx * ny)
    return min(1.0, max(-1.0, raw))


def brute_distance(xs, ys) -> float:
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(xs, ys)))


def brute_argmax(query, candidates) -> int:
    best_idx = 0
    best = -math.inf
    for i, cand in enumerate(candidates):
        score = brute_cosine(query, cand)
        if score > best:
            best = score
            best_idx = i
    return best_idx


def brute_accuracy(records, language) -> float:
    hits = total = 0
    for rec in records:
        if rec.lang == language:
            total += 1
            if rec.correct:
                hits += 1
    if total == 0:
        raise ZeroDivisionError("empty cohort")
    return hits / total


def random_vector(rng: np.random.Generator, dim: int) -> Vector:
    while True:
        arr = rng.standard_normal(dim)
        if np.linalg.norm(arr) > 1e-6:
            return Vector(arr)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(20240901))


def write_embeddings(path: Path, records) -> Path:
    save_embeddings(records, path)
    return path


def write_json(path: Path, tree) -> Path:
    path.write_text(json.dumps(tree, indent=1), encoding="utf-8")
    return path


def bilingual_fixture(tmp_path: Path, n_pairs: int = 4, dim: int = 8, seed: int = 7):
    """Embeddings + manifest for an en/de individual audit."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    gen = np.random.Generator(np.random.PCG64(seed))
    records = []
    pairs = []
    for i in range(n_pairs):
        img = f"img_{i:04d}"
        records.append(EmbeddingRecord(img, "image", None, Vector(gen.standard_normal(dim))))
        texts = {}
        for lang in ("en", "de"):
            tid = f"cap_{i:04d}_{lang}"
            records.append(EmbeddingRecord(tid, "text", lang, Vector(gen.standard_normal(dim))))
            texts[lang] = tid
        pairs.append({"image_id": img, "texts": texts})
    emb_path = write_embeddings(tmp_path / "embeddings.embjsonl", records)
    manifest_path = write_json(
        tmp_path / "manifest.json",
        {"portion_tag": "translation", "pairs": pairs},
    )
    return emb_path, manifest_path


def gender_audit_fixture(tmp_path: Path, languages=("en", "de"), dim: int = 6, seed: int = 11):
    """Embeddings, manifest, prompt spec, and prompt embeddings for a tiny
    gender classification audit over the given languages."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    gen = np.random.Generator(np.random.PCG64(seed))
    labels = ("female", "male")
    prompt_records = []
    for lang in languages:
        for label in labels:
            prompt_records.append(
                EmbeddingRecord(
                    f"gender/{lang}/{label}", "text", lang,
                    Vector(gen.standard_normal(dim)),
                )
            )
    image_records = []
    groups = {}
    for i in range(6):
        img = f"face_{i:04d}"
        image_records.append(
            EmbeddingRecord(img, "image", None, Vector(gen.standard_normal(dim)))
        )
        groups[img] = {"gender": labels[i % 2], "race": ("White", "Black", "Indian")[i % 3]}
    emb_path = write_embeddings(tmp_path / "images.embjsonl", image_records)
    prompt_emb_path = write_embeddings(tmp_path / "prompts.embjsonl", prompt_records)
    manifest_path = write_json(
        tmp_path / "manifest.json",
        {
            "taxonomy": {
                "gender": ["female", "male"],
                "race": ["White", "Black", "Indian"],
            },
            "groups": groups,
        },
    )
    spec_path = write_json(
        tmp_path / "prompts.json",
        {
            "dimension": "gender",
            "labels": list(labels),
            "templates": {lang: "A photo of a {label}" for lang in languages},
            "surfaces": {
                lang: {"female": "woman", "male": "man"} for lang in languages
            },
        },
    )
    return emb_path, manifest_path, spec_path, prompt_emb_path
