"""Image/text encoders behind one small interface.

Two backends:

* ``dev:<dim>[:<seed>]`` -- a deterministic offline encoder that derives a
  Gaussian feature vector from the SHA-256 digest of the content (image bytes
  or UTF-8 text). No model download, bit-stable across platforms; meant for
  pipeline tests and format contracts, not for semantic audits.
* any other id -- loaded with sentence-transformers (e.g. "clip-ViT-B-32"
  for images paired with "sentence-transformers/clip-ViT-B-32-multilingual-v1"
  for multilingual text). Requires the optional [models] extra and a local or
  downloadable checkpoint.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["ExporterError", "Encoder", "DevEncoder", "SentenceTransformerEncoder", "load_encoder"]


class ExporterError(Exception):
    pass


class Encoder:
    """Minimal encoder interface: one vector per image path or text string."""

    model_id: str
    dim: int

    def encode_image(self, path: Path) -> np.ndarray:
        raise NotImplementedError

    def encode_text(self, text: str) -> np.ndarray:
        raise NotImplementedError


@dataclass
class DevEncoder(Encoder):
    """Deterministic content-hash encoder (no model, no network).

    The SHA-256 digest of the content seeds a PCG64 stream that emits the
    feature vector, so identical content always maps to identical vectors.
    """

    dim: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ExporterError(f"dev encoder dim must be >= 1, got {self.dim}")
        self.model_id = f"dev:{self.dim}:{self.seed}"

    def _vector_for(self, payload: bytes) -> np.ndarray:
        digest = hashlib.sha256(payload).digest()
        key = int.from_bytes(digest[:8], "big") ^ self.seed
        rng = np.random.Generator(np.random.PCG64(key))
        while True:
            vec = rng.standard_normal(self.dim)
            if np.linalg.norm(vec) > 0.0:
                return vec

    def encode_image(self, path: Path) -> np.ndarray:
        return self._vector_for(b"image\x00" + Path(path).read_bytes())

    def encode_text(self, text: str) -> np.ndarray:
        return self._vector_for(b"text\x00" + text.encode("utf-8"))


class SentenceTransformerEncoder(Encoder):
    """Real checkpoints via sentence-transformers.

    ``image_model_id`` lets image features come from a different checkpoint
    than text features (the usual pairing for multilingual CLIP-style stacks).
    """

    def __init__(self, model_id: str, image_model_id: str | None = None):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ExporterError(
                "sentence-transformers is not installed; install the [models] "
                "extra or use a dev:<dim> model id"
            ) from exc
        try:
            self._text_model = SentenceTransformer(model_id)
            self._image_model = (
                SentenceTransformer(image_model_id) if image_model_id else self._text_model
            )
        except Exception as exc:
            raise ExporterError(f"could not load checkpoint: {exc}") from exc
        self.model_id = model_id if not image_model_id else f"{model_id}+{image_model_id}"
        probe = self._text_model.encode(["probe"], convert_to_numpy=True)
        self.dim = int(probe.shape[1])

    def encode_image(self, path: Path) -> np.ndarray:
        from PIL import Image

        with Image.open(path) as img:
            vec = self._image_model.encode([img.convert("RGB")], convert_to_numpy=True)[0]
        return np.asarray(vec, dtype=np.float64)

    def encode_text(self, text: str) -> np.ndarray:
        vec = self._text_model.encode([text], convert_to_numpy=True)[0]
        return np.asarray(vec, dtype=np.float64)


def load_encoder(model_id: str, image_model_id: str | None = None) -> Encoder:
    """Resolve a model id to an encoder instance."""
    if model_id.startswith("dev:"):
        parts = model_id.split(":")
        try:
            dim = int(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
        except (IndexError, ValueError):
            raise ExporterError(
                f"dev model id must look like dev:<dim>[:<seed>], got {model_id!r}"
            ) from None
        return DevEncoder(dim=dim, seed=seed)
    return SentenceTransformerEncoder(model_id, image_model_id)
