import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ceceval.embedder import ProviderConfig, ProviderKind
from ceceval.lexical import (
    RougeVariant,
    bleu,
    embf1,
    meteor,
    rouge,
    rouge1,
    rouge2,
    rougeL,
)
from ceceval.textseg import TokenSequence

from reference_impls import (
    bleu_ref,
    fnv1a_64_ref,
    meteor_ref,
    rouge1_ref,
    rouge2_ref,
    rougeL_ref,
)

HASHED = ProviderConfig(kind=ProviderKind.HASHED_BOW, dimension=256)

tokens_strategy = st.lists(st.sampled_from(["w1", "w2", "w3", "w4", "w5"]), max_size=8)


class TestBleu:
    def test_identical(self):
        assert bleu(["the", "cat", "sat"], ["the", "cat", "sat"]) == pytest.approx(1.0)

    def test_short_candidate_brevity_penalty(self):
        got = bleu(["the", "cat"], ["the", "cat", "sat", "on", "the", "mat"])
        assert got == pytest.approx(math.exp(-2.0), abs=1e-9)
        assert got == pytest.approx(0.13534, abs=1e-5)

    def test_smoothing_on_zero_matches(self):
        assert bleu(["dog"], ["cat"]) == pytest.approx(0.1, abs=1e-12)

    def test_empty_candidate(self):
        assert bleu([], ["the", "cat"]) == 0.0

    def test_accepts_token_sequence(self):
        seq = TokenSequence(["the", "cat"])
        assert bleu(seq, seq) == pytest.approx(1.0)

    def test_effective_order_capped_by_candidate(self):
        # two-token candidate uses orders 1-2 only
        value = bleu(["a", "b"], ["a", "b"])
        assert value == pytest.approx(1.0)


class TestRouge:
    def test_rouge1_example(self):
        assert rouge1(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(2 / 3, abs=1e-12)

    def test_rouge2_example(self):
        assert rouge2(["a", "b", "c"], ["a", "b", "d"]) == pytest.approx(0.5, abs=1e-12)

    def test_rougeL_example(self):
        assert rougeL(["a", "b", "c"], ["a", "c", "b"]) == pytest.approx(2 / 3, abs=1e-12)

    def test_empty_sides(self):
        assert rouge1([], ["a"]) == 0.0
        assert rouge1(["a"], []) == 0.0
        assert rouge2(["a"], ["a"]) == 0.0  # no bigrams on either side
        assert rougeL([], []) == 0.0

    def test_variant_dispatch(self):
        gen, ref = ["a", "b"], ["a", "b"]
        assert rouge(gen, ref, RougeVariant.R1) == 1.0
        assert rouge(gen, ref, RougeVariant.R2) == 1.0
        assert rouge(gen, ref, RougeVariant.RL) == 1.0


class TestMeteor:
    def test_identical_tokens(self):
        got = meteor(["the", "cat", "sat"], ["the", "cat", "sat"])
        assert got == pytest.approx(1.0 - 0.5 / 27.0, abs=1e-12)
        assert got == pytest.approx(0.98148, abs=1e-5)

    def test_disjoint(self):
        assert meteor(["dog"], ["cat"]) == 0.0

    def test_swapped_tokens_two_chunks(self):
        assert meteor(["the", "cat"], ["cat", "the"]) == pytest.approx(0.5, abs=1e-12)

    def test_empty(self):
        assert meteor([], ["a"]) == 0.0
        assert meteor(["a"], []) == 0.0

    def test_chunk_minimization_over_duplicates(self):
        # greedy longest-run matching would report 3 chunks here; the
        # optimal assignment needs only 2
        gen = ["a", "a", "b", "a"]
        ref = ["b", "a", "a", "a"]
        assert meteor(gen, ref) == pytest.approx(meteor_ref(gen, ref), abs=1e-12)

    def test_repetitive_output_stays_fast(self):
        # looping generations must not trigger exponential alignment cost
        import time

        started = time.perf_counter()
        score = meteor(["loop"] * 40, ["loop"] * 35)
        assert time.perf_counter() - started < 0.1
        assert 0.9 < score <= 1.0


class TestEmbF1:
    def test_identical(self):
        tokens = ["warming", "melts", "ice"]
        assert embf1(tokens, tokens, HASHED) == pytest.approx(1.0, abs=1e-9)

    def test_half_overlap(self):
        buckets = {w: fnv1a_64_ref(w) % 256 for w in ["a", "b", "c"]}
        assert len(set(buckets.values())) == 3
        assert embf1(["a", "b"], ["a", "c"], HASHED) == pytest.approx(0.5, abs=1e-12)

    def test_empty_sides(self):
        assert embf1([], ["a"], HASHED) == 0.0
        assert embf1(["a"], [], HASHED) == 0.0


class TestStructuralProperties:
    identical = ["heat", "melts", "ice"]
    disjoint_a = ["sun", "wind"]
    disjoint_b = ["coal", "smoke"]

    def test_identical_inputs_score_one(self):
        assert bleu(self.identical, self.identical) == pytest.approx(1.0)
        assert rouge1(self.identical, self.identical) == pytest.approx(1.0)
        assert rouge2(self.identical, self.identical) == pytest.approx(1.0)
        assert rougeL(self.identical, self.identical) == pytest.approx(1.0)
        assert meteor(self.identical, self.identical) > 0.9
        assert embf1(self.identical, self.identical, HASHED) == pytest.approx(1.0, abs=1e-9)

    def test_disjoint_inputs_score_zero(self):
        buckets = {w: fnv1a_64_ref(w) % 256 for w in self.disjoint_a + self.disjoint_b}
        assert len(set(buckets.values())) == 4
        assert rouge1(self.disjoint_a, self.disjoint_b) == 0.0
        assert rougeL(self.disjoint_a, self.disjoint_b) == 0.0
        assert meteor(self.disjoint_a, self.disjoint_b) == 0.0
        assert embf1(self.disjoint_a, self.disjoint_b, HASHED) == 0.0

    @given(tokens_strategy, tokens_strategy)
    def test_rouge_symmetric(self, a, b):
        assert rouge1(a, b) == pytest.approx(rouge1(b, a), abs=1e-12)
        assert rouge2(a, b) == pytest.approx(rouge2(b, a), abs=1e-12)
        assert rougeL(a, b) == pytest.approx(rougeL(b, a), abs=1e-12)

    @given(tokens_strategy, tokens_strategy)
    def test_embf1_symmetric(self, a, b):
        assert embf1(a, b, HASHED) == pytest.approx(embf1(b, a, HASHED), abs=1e-12)

    def test_bleu_and_meteor_asymmetric(self):
        short, long_ = ["the", "cat"], ["the", "cat", "sat", "on", "the", "mat"]
        assert bleu(short, long_) != pytest.approx(bleu(long_, short), abs=1e-6)
        gen, ref = ["a"], ["a", "a", "b"]
        assert meteor(gen, ref) != pytest.approx(meteor(ref, gen), abs=1e-6)

    @given(tokens_strategy, tokens_strategy)
    def test_ranges(self, a, b):
        assert 0.0 <= bleu(a, b) <= 1.0
        assert 0.0 <= rouge1(a, b) <= 1.0
        assert 0.0 <= rouge2(a, b) <= 1.0
        assert 0.0 <= rougeL(a, b) <= 1.0
        assert 0.0 <= meteor(a, b) <= 1.0


class TestRandomizedReferenceEquivalence:
    """The exhaustive length-4 sweep lives in the acceptance suite; this
    randomized version covers longer sequences with duplicates."""

    @given(
        st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=7),
        st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=7),
    )
    def test_random_pairs_match_reference(self, gen, ref):
        assert abs(bleu(gen, ref) - bleu_ref(gen, ref)) <= 1e-9
        assert abs(rouge1(gen, ref) - rouge1_ref(gen, ref)) <= 1e-9
        assert abs(rouge2(gen, ref) - rouge2_ref(gen, ref)) <= 1e-9
        assert abs(rougeL(gen, ref) - rougeL_ref(gen, ref)) <= 1e-9
        assert abs(meteor(gen, ref) - meteor_ref(gen, ref)) <= 1e-9
