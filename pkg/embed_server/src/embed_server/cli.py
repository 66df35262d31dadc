"""Run the embedding server from the command line."""

from __future__ import annotations

import argparse
import logging
import sys

import uvicorn

from .app import Device, ServerConfig, create_app
from .models import BUILTIN_MODEL_NAME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-server",
        description="HTTP sentence-embedding service (POST /embed, GET /health)",
    )
    parser.add_argument(
        "--model",
        default=BUILTIN_MODEL_NAME,
        help="sentence-transformers name, or the built-in deterministic model",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8199)
    parser.add_argument("--max-batch", type=int, default=256)
    parser.add_argument(
        "--device", choices=["cpu", "accelerator"], default="cpu"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO)
    args = build_parser().parse_args(argv)
    config = ServerConfig(
        model_name=args.model,
        port=args.port,
        max_batch=args.max_batch,
        device=Device(args.device),
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
