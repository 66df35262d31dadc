"""Deterministic hashing and seeded-sampling primitives.

FNV-1a keys the embedding and response caches, SplitMix64 drives the
pair sampler. Both are pinned here so cache hits and sample draws are
reproducible across platforms, processes, and reimplementations.
"""

from __future__ import annotations

from typing import Iterable, Sequence, TypeVar

_MASK64 = (1 << 64) - 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

T = TypeVar("T")


def fnv1a_64(data: bytes | str, seed: int = FNV_OFFSET) -> int:
    """64-bit FNV-1a over raw bytes (strings are UTF-8 encoded)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = seed
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def fnv1a_hex(data: bytes | str) -> str:
    """FNV-1a digest as the 16-char lowercase hex used in cache files."""
    return format(fnv1a_64(data), "016x")


def content_digest(texts: Iterable[str]) -> int:
    """Order-sensitive 64-bit digest of a sequence of texts."""
    h = FNV_OFFSET
    for text in texts:
        h = fnv1a_64(text, seed=h)
        h = fnv1a_64(b"\x1f", seed=h)
    return h


class SplitMix64:
    """Minimal counter-based PRNG; the shuffle below relies on its exact stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)


def seeded_shuffle(items: Sequence[T], seed: int) -> list[T]:
    """Fisher-Yates over a copy of ``items``, highest index first.

    Swap index ``j`` is ``next_u64() % (i + 1)``. Modulo bias is
    irrelevant at corpus scale and keeping the rule this simple makes the
    draw easy to reproduce outside this package.
    """
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next_u64() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def seeded_sample(items: Sequence[T], n: int, seed: int) -> list[T]:
    """First ``n`` elements of the seeded shuffle (without replacement)."""
    if n > len(items):
        raise ValueError(f"cannot sample {n} from {len(items)} items")
    return seeded_shuffle(items, seed)[:n]
