"""Reference-based baseline metrics over token sequences.

Implements sentence-level BLEU with epsilon smoothing, ROUGE-1/2/L,
exact-match METEOR, and a token-level embedding F1 that reuses the
pluggable embedding providers. Each function scores one
(generation, reference) pair; corpus aggregation happens in the report
layer.
"""

from __future__ import annotations

import math
from collections import Counter
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .embedder import ProviderConfig, embed_batch
from .textseg import TokenSequence

BLEU_EPSILON = 0.1

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

# Above this length per side, METEOR alignment falls back from the exact
# lexicographic search to greedy longest-run matching (chunk minimization
# is NP-hard in general; real explanations rarely need exactness there).
# 10 keeps the pathological all-duplicates case under ~100 ms.
_EXACT_ALIGN_LIMIT = 10


class RougeVariant(Enum):
    R1 = "rouge1"
    R2 = "rouge2"
    RL = "rougeL"


def _tokens(seq: TokenSequence | Sequence[str]) -> tuple[str, ...]:
    if isinstance(seq, TokenSequence):
        return tuple(seq.tokens)
    return tuple(seq)


def _ngrams(tokens: tuple[str, ...], order: int) -> Counter:
    return Counter(tokens[i : i + order] for i in range(len(tokens) - order + 1))


def bleu(
    gen: TokenSequence | Sequence[str],
    ref: TokenSequence | Sequence[str],
    max_order: int = 4,
) -> float:
    """Sentence-level BLEU with clipping and epsilon smoothing.

    The effective order is min(max_order, |gen|); orders with zero
    clipped matches contribute epsilon / (candidate n-gram count) instead
    of zero so a single missing order does not zero the whole score.
    """
    g = _tokens(gen)
    r = _tokens(ref)
    if not g:
        return 0.0
    effective_order = min(max_order, len(g))
    log_precision_sum = 0.0
    for order in range(1, effective_order + 1):
        gen_counts = _ngrams(g, order)
        ref_counts = _ngrams(r, order)
        total = len(g) - order + 1
        clipped = sum(min(c, ref_counts[gram]) for gram, c in gen_counts.items())
        precision = clipped / total if clipped > 0 else BLEU_EPSILON / total
        log_precision_sum += math.log(precision)
    brevity = min(1.0, math.exp(1.0 - len(r) / len(g)))
    return brevity * math.exp(log_precision_sum / effective_order)


def _lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    # classic O(|a|*|b|) table; explanations are short enough
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[len(b)]


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def rouge(
    gen: TokenSequence | Sequence[str],
    ref: TokenSequence | Sequence[str],
    variant: RougeVariant,
) -> float:
    """F1 over clipped unigram/bigram overlap (R1/R2) or LCS length (RL)."""
    g = _tokens(gen)
    r = _tokens(ref)
    if variant is RougeVariant.RL:
        if not g or not r:
            return 0.0
        lcs = _lcs_length(g, r)
        return _f1(lcs / len(g), lcs / len(r))
    order = 1 if variant is RougeVariant.R1 else 2
    gen_counts = _ngrams(g, order)
    ref_counts = _ngrams(r, order)
    gen_total = sum(gen_counts.values())
    ref_total = sum(ref_counts.values())
    if gen_total == 0 or ref_total == 0:
        return 0.0
    overlap = sum(min(c, ref_counts[gram]) for gram, c in gen_counts.items())
    return _f1(overlap / gen_total, overlap / ref_total)


def rouge1(gen, ref) -> float:
    return rouge(gen, ref, RougeVariant.R1)


def rouge2(gen, ref) -> float:
    return rouge(gen, ref, RougeVariant.R2)


def rougeL(gen, ref) -> float:
    return rouge(gen, ref, RougeVariant.RL)


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    if not pairs:
        return 0
    pairs = sorted(pairs)
    count = 1
    for (g1, r1), (g2, r2) in zip(pairs, pairs[1:]):
        if g2 != g1 + 1 or r2 != r1 + 1:
            count += 1
    return count


def _align_exact(g: tuple[str, ...], r: tuple[str, ...]) -> tuple[int, int]:
    """Lexicographically optimal alignment: max matches, then min chunks.

    DP over (gen position, used-reference bitmask, reference index matched
    at the previous gen position or -1). Exponential in |ref|, hence the
    size cap at the call site.
    """

    @lru_cache(maxsize=None)
    def best(gi: int, used: int, prev_rj: int) -> tuple[int, int]:
        if gi == len(g):
            return (0, 0)
        skip_m, skip_c = best(gi + 1, used, -1)
        best_m, best_c = skip_m, skip_c
        for rj in range(len(r)):
            if used & (1 << rj) or r[rj] != g[gi]:
                continue
            sub_m, sub_c = best(gi + 1, used | (1 << rj), rj)
            new_chunk = 0 if prev_rj >= 0 and rj == prev_rj + 1 else 1
            m, c = sub_m + 1, sub_c + new_chunk
            if m > best_m or (m == best_m and c < best_c):
                best_m, best_c = m, c
        return (best_m, best_c)

    result = best(0, 0, -1)
    best.cache_clear()
    return result


def _align_greedy(g: tuple[str, ...], r: tuple[str, ...]) -> tuple[int, int]:
    """Longest-common-run-first matching; near-optimal on natural text."""
    used_g = [False] * len(g)
    used_r = [False] * len(r)
    pairs: list[tuple[int, int]] = []
    while True:
        best_len = 0
        best_at = (0, 0)
        for gs in range(len(g)):
            if used_g[gs]:
                continue
            for rs in range(len(r)):
                length = 0
                while (
                    gs + length < len(g)
                    and rs + length < len(r)
                    and not used_g[gs + length]
                    and not used_r[rs + length]
                    and g[gs + length] == r[rs + length]
                ):
                    length += 1
                if length > best_len:
                    best_len, best_at = length, (gs, rs)
        if best_len == 0:
            break
        gs, rs = best_at
        for k in range(best_len):
            used_g[gs + k] = True
            used_r[rs + k] = True
            pairs.append((gs + k, rs + k))
    return len(pairs), _chunk_count(pairs)


def meteor(
    gen: TokenSequence | Sequence[str],
    ref: TokenSequence | Sequence[str],
) -> float:
    """Exact-match METEOR (no stemming or synonymy).

    Unigram alignment maximizes matches and then minimizes chunks;
    F_mean = P*R / (alpha*P + (1-alpha)*R) with the fragmentation penalty
    gamma * (chunks/matches)^beta. Identical strings score just below 1
    because a single chunk still carries a small penalty.
    """
    g = _tokens(gen)
    r = _tokens(ref)
    if not g or not r:
        return 0.0
    if len(g) <= _EXACT_ALIGN_LIMIT and len(r) <= _EXACT_ALIGN_LIMIT:
        matches, chunks = _align_exact(g, r)
    else:
        matches, chunks = _align_greedy(g, r)
    if matches == 0:
        return 0.0
    precision = matches / len(g)
    recall = matches / len(r)
    f_mean = (
        precision
        * recall
        / (METEOR_ALPHA * precision + (1.0 - METEOR_ALPHA) * recall)
    )
    penalty = METEOR_GAMMA * (chunks / matches) ** METEOR_BETA
    return f_mean * (1.0 - penalty)


def embf1(
    gen: TokenSequence | Sequence[str],
    ref: TokenSequence | Sequence[str],
    provider: ProviderConfig,
) -> float:
    """Greedy token-embedding F1: harmonic mean of max-cosine precision
    (over generated tokens) and recall (over reference tokens)."""
    g = _tokens(gen)
    r = _tokens(ref)
    if not g or not r:
        return 0.0
    gen_rows = embed_batch(provider, list(g)).rows
    ref_rows = embed_batch(provider, list(r)).rows
    gen_norms = np.linalg.norm(gen_rows, axis=1, keepdims=True)
    ref_norms = np.linalg.norm(ref_rows, axis=1, keepdims=True)
    gen_unit = gen_rows / np.where(gen_norms == 0.0, 1.0, gen_norms)
    ref_unit = ref_rows / np.where(ref_norms == 0.0, 1.0, ref_norms)
    sim = np.clip(gen_unit @ ref_unit.T, -1.0, 1.0)
    precision = math.fsum(sim.max(axis=1)) / len(g)
    recall = math.fsum(sim.max(axis=0)) / len(r)
    if precision + recall == 0.0:
        return 0.0
    score = 2.0 * precision * recall / (precision + recall)
    return max(-1.0, min(1.0, score))
