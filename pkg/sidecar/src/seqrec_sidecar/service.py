"""FastAPI application exposing /embed, /generate, and /healthz."""

from __future__ import annotations

from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException

from .schemas import (
    BackendInfo,
    Candidate,
    EmbedRequest,
    EmbedResponse,
    GenerateRequest,
    GenerateResponse,
    Health,
)
from .stub import StubEmbedder, StubGenerator

DEFAULT_MAX_BATCH = 512


@dataclass
class Settings:
    mode: str = "stub"  # stub | real
    dim: int = 384
    max_batch: int = DEFAULT_MAX_BATCH
    embed_model: str = "intfloat/e5-small-v2"
    gen_model: str = "meta-llama/Llama-3.1-8B"
    adapter_path: str | None = None
    canned_beams: list[str] | None = None
    normalize_embeddings: bool = True  # set False only for ablations
    load_errors: dict = field(default_factory=dict)


def _build_backends(settings: Settings):
    if settings.mode == "stub":
        return StubEmbedder(dim=settings.dim), StubGenerator(settings.canned_beams)
    embedder = generator = None
    try:
        from .real import E5Embedder

        embedder = E5Embedder(settings.embed_model, normalize=settings.normalize_embeddings)
    except Exception as exc:  # noqa: BLE001 - surfaced as 503 per request
        settings.load_errors["embedder"] = str(exc)
    try:
        from .real import BeamSearchGenerator

        generator = BeamSearchGenerator(settings.gen_model, settings.adapter_path)
    except Exception as exc:  # noqa: BLE001
        settings.load_errors["generator"] = str(exc)
    return embedder, generator


def create_app(
    settings: Settings | None = None,
    embedder=None,
    generator=None,
    build_backends: bool = True,
) -> FastAPI:
    """Build the service; backends may be injected (or suppressed) for tests."""
    settings = settings or Settings()
    if embedder is None and generator is None and build_backends:
        embedder, generator = _build_backends(settings)

    app = FastAPI(title="seqrec inference sidecar")
    app.state.settings = settings
    app.state.embedder = embedder
    app.state.generator = generator

    @app.post("/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        if embedder is None:
            raise HTTPException(status_code=503, detail="embedding model not loaded")
        if not request.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        if len(request.texts) > settings.max_batch:
            raise HTTPException(
                status_code=413,
                detail=f"batch of {len(request.texts)} exceeds limit {settings.max_batch}",
            )
        vectors = embedder.embed(request.texts, request.role)
        return EmbedResponse(
            dim=embedder.dim,
            vectors=[[float(x) for x in row] for row in vectors],
            normalized=embedder.normalized,
        )

    @app.post("/generate", response_model=GenerateResponse)
    def generate(request: GenerateRequest) -> GenerateResponse:
        if generator is None:
            raise HTTPException(status_code=503, detail="generation model not loaded")
        beams = generator.generate(request.prompt, request.num_beams, request.max_new_tokens)
        return GenerateResponse(
            candidates=[Candidate(text=t, score=s) for t, s in beams]
        )

    @app.get("/healthz", response_model=Health)
    def healthz() -> Health:
        embed_info = None
        if embedder is not None:
            embed_info = BackendInfo(
                name=embedder.name, dim=embedder.dim,
                extra={"normalized": embedder.normalized},
            )
        gen_info = None
        if generator is not None:
            gen_info = BackendInfo(
                name=generator.name, extra=dict(generator.decoding)
            )
        status = "ok" if (embedder is not None or generator is not None) else "degraded"
        if settings.load_errors:
            status = "degraded"
        return Health(
            status=status, mode=settings.mode, embedder=embed_info, generator=gen_info
        )

    return app
