"""The embedding service: POST /embed and GET /health.

Wire protocol (shared with the retrieval engine's remote embedder):

    POST /embed   {"texts": ["...", ...]}
        -> 200 {"vectors": [[...], ...], "dim": N}
        -> 400 malformed body, 413 over limits, 503 model not loaded

    GET /health   -> 200 {"status": "ok", "dim": N, "model": "..."}

The model is loaded once at startup from EMBEDSVC_MODEL (a Hugging Face
model name or a local directory, default roberta-base); the server still
comes up when loading fails and answers 503 until it is fixed.
"""

from __future__ import annotations

import logging
import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoder import Encoder

log = logging.getLogger("embedsvc")

DEFAULT_MODEL = "roberta-base"
DEFAULT_PORT = 8876
MAX_TEXTS = 256
MAX_CHARS = 8192


def create_app(model_name: str | None = None) -> FastAPI:
    name = model_name or os.environ.get("EMBEDSVC_MODEL", DEFAULT_MODEL)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        try:
            app.state.encoder = Encoder(name)
            log.info("loaded %s (dim %d)", name, app.state.encoder.dim)
        except Exception:
            app.state.encoder = None
            log.exception("failed to load model %r; serving 503", name)
        yield

    app = FastAPI(title="embedsvc", lifespan=lifespan)

    @app.post("/embed")
    async def embed(request: Request):
        encoder = getattr(request.app.state, "encoder", None)
        if encoder is None:
            return JSONResponse({"error": "model not loaded"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body is not valid JSON"}, status_code=400)
        if not isinstance(body, dict) or "texts" not in body:
            return JSONResponse({"error": "body must be {\"texts\": [...]}"},
                                status_code=400)
        texts = body["texts"]
        if (
            not isinstance(texts, list)
            or not texts
            or any(not isinstance(t, str) or not t.strip() for t in texts)
        ):
            return JSONResponse(
                {"error": "texts must be a non-empty list of non-empty strings"},
                status_code=400,
            )
        if len(texts) > MAX_TEXTS or any(len(t) > MAX_CHARS for t in texts):
            return JSONResponse(
                {"error": f"at most {MAX_TEXTS} texts of {MAX_CHARS} chars each"},
                status_code=413,
            )
        vectors = encoder.embed(texts)
        return {"vectors": vectors, "dim": encoder.dim}

    @app.get("/health")
    async def health(request: Request):
        encoder = getattr(request.app.state, "encoder", None)
        if encoder is None:
            return JSONResponse({"status": "unavailable"}, status_code=503)
        return {"status": "ok", "dim": encoder.dim, "model": encoder.model_name}

    return app


def main() -> None:
    import uvicorn

    logging.basicConfig(level=logging.INFO)
    uvicorn.run(
        create_app(),
        host=os.environ.get("HOST", "0.0.0.0"),
        port=int(os.environ.get("PORT", DEFAULT_PORT)),
    )


if __name__ == "__main__":
    main()
