"""HTTP service speaking the embedding wire protocol.

GET  /health -> {"status": "ok", "dim": <int>, "model": "<name>"}
POST /encode -> {"embeddings": [[...], ...]} for {"texts": ["...", ...]}

Embeddings are L2-normalized server-side regardless of the backend's own
conventions. Errors use non-2xx statuses with {"error": "<message>"};
batches over the configured cap are refused with 413. The service keeps
no state between requests.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .encoders import load_encoder

__all__ = ["SidecarConfig", "create_app"]

DEFAULT_MODEL = "hash:384:0"
DEFAULT_BATCH_CAP = 64


@dataclass(frozen=True)
class SidecarConfig:
    model: str = DEFAULT_MODEL
    host: str = "127.0.0.1"
    port: int = 8008
    batch_cap: int = DEFAULT_BATCH_CAP
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_cap < 1:
            raise ValueError("batch cap must be >= 1")

    @classmethod
    def from_env(cls, **overrides) -> "SidecarConfig":
        merged = {
            "model": os.environ.get("SIDECAR_MODEL", DEFAULT_MODEL),
            "port": int(os.environ.get("SIDECAR_PORT", "8008")),
        }
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**merged)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(config: SidecarConfig | None = None) -> FastAPI:
    config = config or SidecarConfig.from_env()
    encoder = load_encoder(config.model)
    app = FastAPI(title="tvn-sidecar", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return _error(400, f"malformed request: {exc.errors()[:1]}")

    @app.get("/health")
    async def health():
        return {"status": "ok", "dim": encoder.dim, "model": encoder.name}

    @app.post("/encode")
    async def encode(payload: dict):
        texts = payload.get("texts")
        if not isinstance(texts, list) or not texts:
            return _error(400, "'texts' must be a non-empty list of strings")
        if any(not isinstance(t, str) or not t for t in texts):
            return _error(400, "every text must be a non-empty string")
        if len(texts) > config.batch_cap:
            return _error(
                413,
                f"batch of {len(texts)} exceeds cap {config.batch_cap}",
            )
        vectors = np.asarray(encoder.encode(texts), dtype=np.float64)
        if vectors.shape != (len(texts), encoder.dim):
            return _error(500, "backend returned a malformed batch")
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if not np.all(np.isfinite(vectors)) or np.any(norms == 0.0):
            return _error(500, "backend returned degenerate embeddings")
        vectors = vectors / norms
        return {"embeddings": vectors.tolist()}

    return app
