"""Embedding providers behind one contract.

Three backends: a dependency-free hashed bag-of-words (the deterministic
test workhorse), precomputed vectors read from a JSONL file, and a remote
HTTP service. All rows come back L2-normalized or exactly zero, and every
backend shares a content-addressed cache keyed by (provider id, FNV-1a of
text).

Remote wire protocol (shared with the embedding server):
  POST {endpoint}/embed  {"texts": [...], "model": "<name>"}
    -> {"vectors": [[...], ...], "dim": <int>, "model": "<name>"}
  GET  {endpoint}/health -> {"status": "ok", "model": "<name>", "dim": <int>}

Cache / precomputed file, one JSON object per line:
  {"provider": "...", "hash": "<hex16>", "text_len": <int>, "vector": [...]}
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import requests

from .hashutil import content_digest, fnv1a_64, fnv1a_hex
from .textseg import tokenize

log = logging.getLogger(__name__)


class EmbeddingError(Exception):
    """Base class for provider failures."""


class ProviderUnavailable(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class CacheCorrupt(EmbeddingError):
    pass


class MissingVector(EmbeddingError):
    """A precomputed provider has no vector for the requested text."""


class ProviderKind(Enum):
    HASHED_BOW = "hashed-bow"
    PRECOMPUTED = "precomputed"
    REMOTE = "remote"


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind = ProviderKind.HASHED_BOW
    dimension: int | None = None
    endpoint: str | None = None
    model_name: str | None = None
    cache_path: str | None = None
    timeout: float = 10.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_inflight: int = 4
    batch_size: int = 64

    def __post_init__(self) -> None:
        if self.kind is ProviderKind.REMOTE and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.kind is ProviderKind.PRECOMPUTED and not self.cache_path:
            raise ValueError("precomputed provider requires cache_path")
        if self.kind is ProviderKind.HASHED_BOW:
            dim = self.dimension if self.dimension is not None else 256
            if dim <= 0:
                raise ValueError("dimension must be positive")
            object.__setattr__(self, "dimension", dim)

    @property
    def provider_id(self) -> str:
        if self.kind is ProviderKind.HASHED_BOW:
            return f"hashed-bow-{self.dimension}"
        if self.kind is ProviderKind.PRECOMPUTED:
            return f"precomputed-{self.model_name or 'default'}"
        return f"remote-{self.model_name or 'default'}"


@dataclass
class EmbeddingMatrix:
    """Row i embeds input text i; all rows share one dimension."""

    rows: np.ndarray
    provider_id: str
    content_hash: int

    @property
    def dimension(self) -> int:
        return int(self.rows.shape[1]) if self.rows.ndim == 2 else 0

    def __len__(self) -> int:
        return int(self.rows.shape[0])


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    """L2-normalize each row; all-zero rows stay exactly zero."""
    if rows.size == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return rows / safe


class EmbeddingCache:
    """In-memory map with optional JSONL persistence.

    Reads are lock-free; writes are serialized. Values are deterministic
    per key, so last-writer-wins is safe under concurrency.
    """

    def __init__(self, path: str | Path | None = None):
        self._entries: dict[tuple[str, str], np.ndarray] = {}
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            self._load()

    def _load(self) -> None:
        assert self._path is not None
        with open(self._path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = (record["provider"], record["hash"])
                    vector = np.asarray(record["vector"], dtype=np.float64)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CacheCorrupt(
                        f"{self._path}: line {line_no} unreadable ({exc})"
                    ) from None
                self._entries[key] = vector

    def get(self, provider_id: str, text_hash: str) -> np.ndarray | None:
        return self._entries.get((provider_id, text_hash))

    def put(self, provider_id: str, text_hash: str, text_len: int, vector: np.ndarray) -> None:
        key = (provider_id, text_hash)
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = vector
            if self._path:
                record = {
                    "provider": provider_id,
                    "hash": text_hash,
                    "text_len": text_len,
                    "vector": [float(x) for x in vector],
                }
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


def _load_vector_store(path: str | Path) -> dict[str, np.ndarray]:
    """Read a cache-format JSONL into a hash -> normalized vector map.

    The provider field in each record is ignored so vectors exported by
    any backend (or external model) can be replayed.
    """
    store: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                vector = np.asarray(record["vector"], dtype=np.float64)
                text_hash = record["hash"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CacheCorrupt(f"{path}: line {line_no} unreadable ({exc})") from None
            norm = np.linalg.norm(vector)
            store[text_hash] = vector / norm if norm > 0 else vector
    return store


class Embedder:
    """Batch embedding frontend for one provider configuration."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self._dimension = config.dimension
        self._session: requests.Session | None = None
        self._inflight = threading.Semaphore(config.max_inflight)
        self._store: dict[str, np.ndarray] | None = None
        if config.kind is ProviderKind.PRECOMPUTED:
            self.cache = EmbeddingCache(None)
            self._store = _load_vector_store(config.cache_path)  # type: ignore[arg-type]
            if not self._store:
                log.warning("precomputed store %s is empty", config.cache_path)
            for vec in self._store.values():
                self._dimension = self._dimension or int(vec.shape[0])
                break
        else:
            self.cache = EmbeddingCache(config.cache_path)

    # -- public API ------------------------------------------------------

    def embed_batch(self, texts: Sequence[str]) -> EmbeddingMatrix:
        """One normalized (or zero) row per text, input order preserved."""
        texts = list(texts)
        digest = content_digest(texts)
        dim = self._dimension
        if not texts:
            rows = np.zeros((0, dim if dim else 0), dtype=np.float64)
            return EmbeddingMatrix(rows, self.config.provider_id, digest)

        hashes = [fnv1a_hex(t) for t in texts]
        if self._store is not None:
            vectors = []
            for text, text_hash in zip(texts, hashes):
                vec = self._store.get(text_hash)
                if vec is None:
                    raise MissingVector(
                        f"precomputed store {self.config.cache_path} has no vector "
                        f"for text of length {len(text)} (hash {text_hash})"
                    )
                vectors.append(vec)
        else:
            vectors = [self.cache.get(self.config.provider_id, h) for h in hashes]
            missing = [i for i, v in enumerate(vectors) if v is None]
            if missing:
                computed = self._compute([texts[i] for i in missing])
                for i, vec in zip(missing, computed):
                    vectors[i] = vec
                    self.cache.put(self.config.provider_id, hashes[i], len(texts[i]), vec)

        dims = {int(v.shape[0]) for v in vectors}
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed vector dimensions {sorted(dims)}")
        rows = np.vstack(vectors)
        return EmbeddingMatrix(rows, self.config.provider_id, digest)

    # -- backends ---------------------------------------------------------

    def _compute(self, texts: list[str]) -> list[np.ndarray]:
        if self.config.kind is ProviderKind.HASHED_BOW:
            return [self._hashed_bow(t) for t in texts]
        return self._remote(texts)

    def _hashed_bow(self, text: str) -> np.ndarray:
        dim = self.config.dimension or 256
        counts = np.zeros(dim, dtype=np.float64)
        for token in tokenize(text):
            counts[fnv1a_64(token) % dim] += 1.0
        norm = np.linalg.norm(counts)
        if norm > 0:
            counts /= norm
        return counts

    def _remote(self, texts: list[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        step = self.config.batch_size
        for start in range(0, len(texts), step):
            out.extend(self._remote_chunk(texts[start : start + step]))
        return out

    def _remote_chunk(self, texts: list[str]) -> list[np.ndarray]:
        if self._session is None:
            self._session = requests.Session()
        url = self.config.endpoint.rstrip("/") + "/embed"  # type: ignore[union-attr]
        body = {"texts": texts, "model": self.config.model_name or "default"}
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                with self._inflight:
                    response = self._session.post(url, json=body, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if response.status_code == 200:
                return self._parse_remote(response, len(texts))
            last_error = f"HTTP {response.status_code}"
            if response.status_code == 429 or response.status_code >= 500:
                continue
            break  # other 4xx: retrying will not help
        raise ProviderUnavailable(
            f"{url} failed after {self.config.max_retries} retries ({last_error})"
        )

    def _parse_remote(self, response: requests.Response, expected: int) -> list[np.ndarray]:
        try:
            payload = response.json()
            vectors = payload["vectors"]
            dim = int(payload["dim"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embed response: {exc}") from None
        if len(vectors) != expected:
            raise ProviderUnavailable(
                f"embed response has {len(vectors)} rows, expected {expected}"
            )
        rows = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.ndim != 1 or arr.shape[0] != dim:
                raise DimensionMismatch(
                    f"row of dimension {arr.shape} does not match dim={dim}"
                )
            rows.append(arr)
        if self._dimension is not None and dim != self._dimension:
            raise DimensionMismatch(
                f"server switched dimension from {self._dimension} to {dim}"
            )
        self._dimension = dim
        # Servers promise normalized rows; renormalize defensively anyway.
        if not rows:
            return []
        normalized = _normalize_rows(np.vstack(rows))
        return [normalized[i] for i in range(normalized.shape[0])]


# One Embedder per configuration so caches and sessions are shared.
_EMBEDDERS: dict[ProviderConfig, Embedder] = {}
_EMBEDDERS_LOCK = threading.Lock()


def get_embedder(config: ProviderConfig) -> Embedder:
    with _EMBEDDERS_LOCK:
        embedder = _EMBEDDERS.get(config)
        if embedder is None:
            embedder = Embedder(config)
            _EMBEDDERS[config] = embedder
        return embedder


def reset_embedders() -> None:
    """Drop shared embedder state (tests use this between cache scenarios)."""
    with _EMBEDDERS_LOCK:
        _EMBEDDERS.clear()


def embed_batch(config: ProviderConfig, texts: Sequence[str]) -> EmbeddingMatrix:
    return get_embedder(config).embed_batch(texts)


def cosine(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector is all zeros."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions differ: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))
