"""Evaluation toolkit for claim-evidence explanations.

Computes the Causal Explanation Coherence (CEC) score -- a symmetric
bidirectional max-cosine alignment between generated and reference
explanation sentences -- alongside BLEU, ROUGE-1/2/L, METEOR, and a
token-level embedding F1, plus paired significance tests over any two
metrics.
"""

from .cec import AggregateScore, CecResult, cec_corpus, cec_instance
from .corpus import (
    Corpus,
    Instance,
    Label,
    load_corpus,
    sample_pairs,
    save_corpus,
    validate_corpus,
)
from .embedder import ProviderConfig, ProviderKind, cosine, embed_batch
from .lexical import RougeVariant, bleu, embf1, meteor, rouge
from .stats import (
    PairedSample,
    PairedTestResult,
    compare,
    descriptive,
    effect_sizes,
    paired_t_test,
    wilcoxon_signed_rank,
)
from .textseg import SentenceSet, TokenSequence, segment, tokenize

__version__ = "0.1.0"

__all__ = [
    "AggregateScore",
    "CecResult",
    "Corpus",
    "Instance",
    "Label",
    "PairedSample",
    "PairedTestResult",
    "ProviderConfig",
    "ProviderKind",
    "RougeVariant",
    "SentenceSet",
    "TokenSequence",
    "bleu",
    "cec_corpus",
    "cec_instance",
    "compare",
    "cosine",
    "descriptive",
    "effect_sizes",
    "embed_batch",
    "embf1",
    "load_corpus",
    "meteor",
    "paired_t_test",
    "rouge",
    "sample_pairs",
    "save_corpus",
    "segment",
    "tokenize",
    "validate_corpus",
    "wilcoxon_signed_rank",
]
