"""Causal Explanation Coherence: bidirectional max-cosine sentence alignment.

For generated sentences g_1..g_n and reference sentences a_1..a_m, the
forward score is the mean over each g_i of its best cosine match among
the a_j (coverage of the generation by the reference); the backward score
is the mean over each a_j of its best match among the g_i (faithfulness
and completeness); the symmetric score is their average. Scores are
order-invariant by construction: permuting either sentence list permutes
rows or columns of the similarity matrix but not the per-row maxima.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Corpus, eligible_instances
from .embedder import ProviderConfig, embed_batch
from .textseg import Origin, SentenceSet, segment

log = logging.getLogger(__name__)


class CecError(Exception):
    pass


class BothExplanationsEmpty(CecError):
    pass


class NoEligibleInstances(CecError):
    pass


@dataclass
class CecResult:
    """Scores plus the argmax alignment behind them.

    ``forward_alignment[i] = (i, j, sim)`` records the reference sentence
    each generated sentence matched best (ties resolved to the lowest
    index); ``backward_alignment`` mirrors it for reference sentences.
    The alignment is diagnostic output: the scalar score alone cannot say
    which sentences drove it.
    """

    forward: float
    backward: float
    symmetric: float
    n: int
    m: int
    forward_alignment: list[tuple[int, int, float]] = field(default_factory=list)
    backward_alignment: list[tuple[int, int, float]] = field(default_factory=list)
    degenerate: bool = False


@dataclass
class AggregateScore:
    """Corpus-level distribution of per-instance symmetric scores."""

    mean: float
    sd: float
    min: float
    max: float
    count: int
    skipped: int = 0


def _sentences(value: SentenceSet | Sequence[str]) -> list[str]:
    if isinstance(value, SentenceSet):
        return list(value.sentences)
    return list(value)


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return rows
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.where(norms == 0.0, 1.0, norms)


def cec_instance(
    gen: SentenceSet | Sequence[str],
    ref: SentenceSet | Sequence[str],
    provider: ProviderConfig,
) -> CecResult:
    """Score one generated/reference sentence-set pair.

    Exactly one empty side yields 0.0 with the degenerate flag instead of
    an error so corpus runs survive models that emit empty strings.
    """
    gen_sentences = _sentences(gen)
    ref_sentences = _sentences(ref)
    n, m = len(gen_sentences), len(ref_sentences)
    if n == 0 and m == 0:
        raise BothExplanationsEmpty("both sentence sets are empty")
    if n == 0 or m == 0:
        return CecResult(0.0, 0.0, 0.0, n, m, degenerate=True)

    gen_rows = _unit_rows(embed_batch(provider, gen_sentences).rows)
    ref_rows = _unit_rows(embed_batch(provider, ref_sentences).rows)
    sim = np.clip(gen_rows @ ref_rows.T, -1.0, 1.0)

    # argmax picks the lowest index on ties, keeping alignments deterministic
    forward_idx = sim.argmax(axis=1)
    backward_idx = sim.argmax(axis=0)
    forward_best = sim[np.arange(n), forward_idx]
    backward_best = sim[backward_idx, np.arange(m)]

    # fsum keeps the means exactly permutation-invariant
    forward = math.fsum(forward_best) / n
    backward = math.fsum(backward_best) / m
    return CecResult(
        forward=forward,
        backward=backward,
        symmetric=(forward + backward) / 2.0,
        n=n,
        m=m,
        forward_alignment=[
            (i, int(forward_idx[i]), float(forward_best[i])) for i in range(n)
        ],
        backward_alignment=[
            (j, int(backward_idx[j]), float(backward_best[j])) for j in range(m)
        ],
    )


def cec_corpus(
    corpus: Corpus,
    model: str,
    provider: ProviderConfig,
    abbreviations: frozenset[str] | None = None,
) -> AggregateScore:
    """Aggregate per-instance symmetric scores for one model.

    Degenerate instances (either explanation segments to zero sentences)
    are skipped with a warning and counted, not scored as zeros.
    """
    instances = eligible_instances(corpus, model=model, require_reference=True)
    scores: list[float] = []
    skipped = 0
    for inst in instances:
        gen = segment(inst.generations[model], Origin.GENERATED, abbreviations)
        ref = segment(inst.reference_explanation or "", Origin.REFERENCE, abbreviations)
        if len(gen) == 0 and len(ref) == 0:
            log.warning("instance %s: both explanations empty, skipping", inst.id)
            skipped += 1
            continue
        result = cec_instance(gen, ref, provider)
        if result.degenerate:
            log.warning("instance %s: one-sided empty explanation, skipping", inst.id)
            skipped += 1
            continue
        scores.append(result.symmetric)

    if not scores:
        raise NoEligibleInstances(
            f"no scorable instances for model {model!r} "
            f"({len(instances)} eligible, {skipped} degenerate)"
        )
    mean = math.fsum(scores) / len(scores)
    if len(scores) > 1:
        variance = math.fsum((s - mean) ** 2 for s in scores) / (len(scores) - 1)
        sd = math.sqrt(variance)
    else:
        sd = 0.0
    return AggregateScore(
        mean=mean,
        sd=sd,
        min=min(scores),
        max=max(scores),
        count=len(scores),
        skipped=skipped,
    )
