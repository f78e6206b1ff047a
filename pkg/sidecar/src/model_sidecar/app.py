"""FastAPI application exposing the model backend over plain JSON.

Endpoints:
  GET  /v1/info       model names and limits
  POST /v1/embed      token-level embeddings with character offsets
  POST /v1/rerank     one relevance score per document, input order
  POST /v1/generate   deterministic text generation

Malformed requests return 400; an unloadable backend returns 503; a prompt
over the context limit returns 413 with the limit in the body.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import DeterministicBackend, PromptTooLong

logger = logging.getLogger(__name__)


class EmbedRequest(BaseModel):
    texts: list[str]
    mode: str = "tokens"


class TokenOut(BaseModel):
    start: int
    end: int
    special: bool = False


class EmbedResultOut(BaseModel):
    dim: int
    truncated: bool
    tokens: list[TokenOut]
    vectors: list[list[float]]


class EmbedResponse(BaseModel):
    results: list[EmbedResultOut]


class RerankRequest(BaseModel):
    query: str
    documents: list[str]


class RerankResponse(BaseModel):
    scores: list[float]


class GenerateRequest(BaseModel):
    prompt: str
    max_tokens: int = Field(default=128, ge=0)


class GenerateResponse(BaseModel):
    text: str


def create_app(backend=None) -> FastAPI:
    app = FastAPI(title="model-sidecar", version="1")
    app.state.backend = backend or DeterministicBackend()

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(PromptTooLong)
    async def prompt_handler(request: Request, exc: PromptTooLong):
        return JSONResponse(status_code=413,
                            content={"detail": str(exc), "limit": exc.limit})

    def backend_or_503():
        try:
            app.state.backend.info()
        except Exception as e:  # noqa: BLE001 - any load failure means "not ready"
            logger.error("backend unavailable: %s", e)
            return None
        return app.state.backend

    @app.get("/v1/info")
    def info():
        backend = backend_or_503()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        meta = backend.info()
        return {
            "models": {
                "embed": meta.embed_model,
                "rerank": meta.rerank_model,
                "generate": meta.generate_model,
            },
            "dim": meta.dim,
            "max_tokens": meta.max_tokens,
            "max_concurrency": meta.max_concurrency,
        }

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest):
        if not request.texts:
            return JSONResponse(status_code=400, content={"detail": "texts must be non-empty"})
        if request.mode != "tokens":
            return JSONResponse(status_code=400,
                                content={"detail": f"unsupported mode {request.mode!r}"})
        backend = backend_or_503()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        results = []
        for text in request.texts:
            result = backend.embed(text)
            results.append(EmbedResultOut(
                dim=result.dim,
                truncated=result.truncated,
                tokens=[TokenOut(start=row.start, end=row.end, special=row.special)
                        for row in result.tokens],
                vectors=[row.vector for row in result.tokens],
            ))
        return EmbedResponse(results=results)

    @app.post("/v1/rerank", response_model=RerankResponse)
    def rerank(request: RerankRequest):
        if not request.documents:
            return JSONResponse(status_code=400,
                                content={"detail": "documents must be non-empty"})
        backend = backend_or_503()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        return RerankResponse(scores=backend.rerank(request.query, request.documents))

    @app.post("/v1/generate", response_model=GenerateResponse)
    def generate(request: GenerateRequest):
        if not request.prompt:
            return JSONResponse(status_code=400, content={"detail": "prompt must be non-empty"})
        backend = backend_or_503()
        if backend is None:
            return JSONResponse(status_code=503, content={"detail": "model not loaded"})
        return GenerateResponse(text=backend.generate(request.prompt, request.max_tokens))

    return app
