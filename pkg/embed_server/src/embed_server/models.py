"""Embedding backends for the server.

Two kinds: a self-contained deterministic feature-hash model that needs
no downloads (the default, and what CI exercises), and an optional
sentence-transformers wrapper for serving a real neural encoder when its
weights are available.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence

import numpy as np

BUILTIN_MODEL_NAME = "local-ngram-384"
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


class EmbeddingModel(Protocol):
    name: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashedNgramModel:
    """Signed feature hashing over word unigrams and character trigrams.

    Buckets and signs come from BLAKE2 digests, so vectors are identical
    across processes and platforms. A constant bias feature keeps every
    vector nonzero (and therefore exactly unit norm after scaling), which
    mirrors how neural sentence encoders never emit a zero vector.
    """

    def __init__(self, dim: int = 384):
        self.name = BUILTIN_MODEL_NAME
        self.dim = dim

    def _features(self, text: str):
        yield "<bias>"
        for word in _WORD_RE.findall(text.lower()):
            yield "w:" + word
            padded = f"^{word}$"
            for i in range(len(padded) - 2):
                yield "c:" + padded[i : i + 3]

    def _embed_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for feature in self._features(text):
            digest = hashlib.blake2b(feature.encode("utf-8"), digest_size=9).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            sign = 1.0 if digest[8] & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.vstack([self._embed_one(t) for t in texts])


class SentenceTransformerModel:
    """Thin wrapper serving any sentence-transformers checkpoint."""

    def __init__(self, model_name: str, device: str = "cpu"):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name, device=device)
        probe = self._model.encode([""], normalize_embeddings=True)
        self.dim = int(probe.shape[1])

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim), dtype=np.float64)
        vectors = self._model.encode(
            list(texts), normalize_embeddings=True, convert_to_numpy=True
        )
        return np.asarray(vectors, dtype=np.float64)


def load_model(model_name: str, device: str = "cpu") -> EmbeddingModel:
    if model_name == BUILTIN_MODEL_NAME:
        return HashedNgramModel()
    try:
        return SentenceTransformerModel(model_name, device=device)
    except Exception as exc:  # import error, missing weights, no network
        raise RuntimeError(
            f"could not load sentence-transformers model {model_name!r}: {exc}; "
            f"use {BUILTIN_MODEL_NAME!r} for the built-in deterministic model"
        ) from exc
