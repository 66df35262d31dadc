"""FastAPI application implementing the embedding wire protocol.

  POST /embed   {"texts": [...], "model": "<name>"}
    -> {"vectors": [[...], ...], "dim": <int>, "model": "<name>"}
  GET  /health  -> {"status": "ok", "model": "<name>", "dim": <int>}

Vectors are L2-normalized server side. One model per process; the
"model" field in requests is informational and the response always names
the model actually loaded. 400 covers malformed bodies and batch
overflow, 503 means the model is still loading.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass
from enum import Enum

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .models import BUILTIN_MODEL_NAME, load_model

log = logging.getLogger(__name__)


class Device(Enum):
    CPU = "cpu"
    ACCELERATOR = "accelerator"


@dataclass
class ServerConfig:
    model_name: str = BUILTIN_MODEL_NAME
    port: int = 8199
    max_batch: int = 256
    device: Device = Device.CPU

    def __post_init__(self) -> None:
        if self.max_batch < 1:
            raise ValueError("max_batch must be at least 1")


class EmbedRequest(BaseModel):
    texts: list[str]
    model: str | None = None


def create_app(config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        device = "cuda" if config.device is Device.ACCELERATOR else "cpu"
        app.state.model = load_model(config.model_name, device=device)
        app.state.encode_lock = threading.Lock()
        log.info(
            "model %s ready (dim=%d)", app.state.model.name, app.state.model.dim
        )
        yield
        app.state.model = None

    app = FastAPI(lifespan=lifespan)
    app.state.model = None
    app.state.config = config

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/health")
    async def health():
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "model": model.name, "dim": model.dim}

    @app.post("/embed")
    async def embed(body: EmbedRequest):
        model = app.state.model
        if model is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        if len(body.texts) > config.max_batch:
            return JSONResponse(
                status_code=400,
                content={
                    "error": f"batch of {len(body.texts)} exceeds max_batch "
                    f"{config.max_batch}"
                },
            )
        # inference serialized: backends are not assumed thread-safe
        with app.state.encode_lock:
            rows = model.encode(body.texts)
        norms = np.linalg.norm(rows, axis=1, keepdims=True) if rows.size else None
        if norms is not None:
            rows = rows / np.where(norms == 0.0, 1.0, norms)
        return {
            "vectors": [row.tolist() for row in rows],
            "dim": model.dim,
            "model": model.name,
        }

    return app
