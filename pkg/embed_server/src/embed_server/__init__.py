"""Sentence-embedding microservice speaking the remote provider protocol."""

from .app import Device, ServerConfig, create_app
from .models import BUILTIN_MODEL_NAME, HashedNgramModel, load_model

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODEL_NAME",
    "Device",
    "HashedNgramModel",
    "ServerConfig",
    "create_app",
    "load_model",
]
