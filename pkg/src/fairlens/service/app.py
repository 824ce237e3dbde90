"""FastAPI service wrapping the audit engine for multi-client use.

The CLI stays a direct library consumer (audits must run without any network
hop); this service exposes the same three operations to remote callers.

Run with: uvicorn fairlens.service.app:app
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import FairlensError
from ..groups import run_group_audit
from ..individual import run_individual_audit, shuffled_audit
from ..ingest import (
    assemble_triples,
    build_prompt_embeddings,
    build_record,
    manifest_image_items,
    parse_manifest,
    parse_prompt_spec,
    resolve_truth,
    store_from_records,
)
from ..oracle import OracleConfig, run_all_checks
from ..report import (
    build_envelope,
    digest_bytes,
    group_payload,
    individual_payload,
    theory_payload,
)
from ..zeroshot import run_zeroshot
from .schemas import (
    EmbeddingRecordModel,
    EnvelopeResponse,
    GroupAuditRequest,
    HealthResponse,
    IndividualAuditRequest,
    TheoryVerifyRequest,
)

__all__ = ["app", "create_app"]


def _store(records: list[EmbeddingRecordModel]):
    return store_from_records(
        build_record(r.id, r.kind, r.lang, r.dim, r.vec) for r in records
    )


def _tree_digest(tree) -> str:
    return digest_bytes(json.dumps(tree, sort_keys=True, separators=(",", ":")).encode())


def create_app() -> FastAPI:
    app = FastAPI(
        title="fairlens",
        version=__version__,
        description=(
            "Fairness audits for multilingual multimodal embeddings: "
            "similarity-gap audits, group disparity audits, and randomized "
            "verification of the bound inequalities."
        ),
    )

    @app.exception_handler(FairlensError)
    async def _fairlens_error(_request: Request, exc: FairlensError) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/audits/individual", response_model=EnvelopeResponse)
    def audit_individual(req: IndividualAuditRequest) -> EnvelopeResponse:
        store = _store(req.embeddings)
        manifest = parse_manifest(req.manifest.as_tree(), store)
        triples = assemble_triples(manifest, store)
        if req.shuffle_seed is None:
            report = run_individual_audit(triples, req.lang_a, req.lang_b)
        else:
            report = shuffled_audit(triples, req.lang_a, req.lang_b, req.shuffle_seed)
        return EnvelopeResponse(
            **build_envelope(
                payload_kind="individual_fairness",
                payload=individual_payload(report),
                input_digests={
                    "embeddings": _tree_digest([r.model_dump() for r in req.embeddings]),
                    "manifest": _tree_digest(req.manifest.as_tree()),
                },
                config={
                    "command": "audit-individual",
                    "lang_a": req.lang_a,
                    "lang_b": req.lang_b,
                    "shuffle_seed": req.shuffle_seed,
                },
            )
        )

    @app.post("/audits/group", response_model=EnvelopeResponse)
    def audit_group(req: GroupAuditRequest) -> EnvelopeResponse:
        store = _store(req.embeddings)
        manifest = parse_manifest(req.manifest.as_tree(), store)
        spec = parse_prompt_spec(req.prompt_spec.as_tree())
        prompt_store = _store(req.prompt_embeddings)
        languages = req.languages or list(spec.languages)
        if req.pivot not in languages:
            raise FairlensError(
                f"pivot language {req.pivot!r} not in audited languages {languages}"
            )
        prompts = build_prompt_embeddings(prompt_store, spec, languages)
        images = manifest_image_items(manifest, store)
        truth = resolve_truth(manifest, spec)
        outcomes = run_zeroshot(
            images, prompts, spec, truth, languages,
            taxonomy=manifest.taxonomy or None,
        )
        group_dims = req.group_dims or list(manifest.taxonomy)
        report = run_group_audit(outcomes, languages, group_dims)
        return EnvelopeResponse(
            **build_envelope(
                payload_kind="group_fairness",
                payload=group_payload(report),
                input_digests={
                    "embeddings": _tree_digest([r.model_dump() for r in req.embeddings]),
                    "prompt_embeddings": _tree_digest(
                        [r.model_dump() for r in req.prompt_embeddings]
                    ),
                    "manifest": _tree_digest(req.manifest.as_tree()),
                    "prompt_spec": _tree_digest(req.prompt_spec.as_tree()),
                },
                config={
                    "command": "audit-group",
                    "languages": languages,
                    "pivot": req.pivot,
                    "group_dims": group_dims,
                    "classified_dimension": spec.dimension,
                },
            )
        )

    @app.post("/theory/verify", response_model=EnvelopeResponse)
    def verify_theory(req: TheoryVerifyRequest) -> EnvelopeResponse:
        try:
            config = OracleConfig(
                seed=req.seed,
                trials=req.trials,
                dim_range=(req.dim_min, req.dim_max),
                rho_fraction_range=(req.rho_lo, req.rho_hi),
                tolerance=req.tolerance,
            )
        except ValueError as exc:
            raise FairlensError(str(exc)) from None
        result = run_all_checks(config)
        return EnvelopeResponse(
            **build_envelope(
                payload_kind="theory_verification",
                payload=theory_payload(result),
                input_digests={},
                config={
                    "command": "verify-theory",
                    "seed": req.seed,
                    "trials": req.trials,
                    "dims": [req.dim_min, req.dim_max],
                    "rho_fractions": [req.rho_lo, req.rho_hi],
                    "tolerance": req.tolerance,
                },
            )
        )

    return app


app = create_app()
