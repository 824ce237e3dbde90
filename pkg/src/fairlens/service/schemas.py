"""Pydantic request/response models for the audit service.

Wire payloads mirror the file formats: embedding records carry the same five
fields as an embjsonl line, manifests and prompt specs the same trees as
their JSON documents. Cross-reference validation happens in the core
ingestion code, not here; these models only pin the shapes.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

__all__ = [
    "EmbeddingRecordModel",
    "ManifestPairModel",
    "ManifestModel",
    "PromptSpecModel",
    "IndividualAuditRequest",
    "GroupAuditRequest",
    "TheoryVerifyRequest",
    "EnvelopeResponse",
    "HealthResponse",
]


class EmbeddingRecordModel(BaseModel):
    id: str = Field(min_length=1)
    kind: Literal["image", "text"]
    lang: Optional[str] = None
    dim: int = Field(ge=1)
    vec: list[float]


class ManifestPairModel(BaseModel):
    image_id: str
    texts: dict[str, str]


class ManifestModel(BaseModel):
    portion_tag: Optional[str] = None
    taxonomy: dict[str, list[str]] = Field(default_factory=dict)
    pairs: list[ManifestPairModel] = Field(default_factory=list)
    groups: dict[str, dict[str, str]] = Field(default_factory=dict)
    truth: dict[str, str] = Field(default_factory=dict)

    def as_tree(self) -> dict:
        return {
            "portion_tag": self.portion_tag,
            "taxonomy": self.taxonomy,
            "pairs": [p.model_dump() for p in self.pairs],
            "groups": self.groups,
            "truth": self.truth,
        }


class PromptSpecModel(BaseModel):
    dimension: str
    labels: list[str]
    templates: dict[str, str]
    surfaces: dict[str, dict[str, str]]

    def as_tree(self) -> dict:
        return self.model_dump()


class IndividualAuditRequest(BaseModel):
    embeddings: list[EmbeddingRecordModel]
    manifest: ManifestModel
    lang_a: str
    lang_b: str
    shuffle_seed: Optional[int] = None


class GroupAuditRequest(BaseModel):
    embeddings: list[EmbeddingRecordModel]
    prompt_embeddings: list[EmbeddingRecordModel]
    manifest: ManifestModel
    prompt_spec: PromptSpecModel
    languages: Optional[list[str]] = None
    pivot: str = "en"
    group_dims: Optional[list[str]] = None


class TheoryVerifyRequest(BaseModel):
    seed: int = Field(default=1, ge=0)
    trials: int = Field(default=10_000, ge=1, le=10_000_000)
    dim_min: int = Field(default=2, ge=1)
    dim_max: int = Field(default=512, ge=1)
    rho_lo: float = Field(default=0.05, ge=0.0, lt=1.0)
    rho_hi: float = Field(default=0.95, gt=0.0, lt=1.0)
    tolerance: float = Field(default=1e-9, gt=0.0)


class EnvelopeResponse(BaseModel):
    """Audit report wrapped with provenance, same shape the CLI writes."""

    tool: str
    tool_version: str
    payload_kind: str
    timestamp: Optional[str]
    input_digests: dict[str, str]
    config: dict
    payload: dict


class HealthResponse(BaseModel):
    status: str
    version: str
