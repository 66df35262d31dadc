import pytest
from hypothesis import given
from hypothesis import strategies as st

from ceceval.hashutil import (
    SplitMix64,
    fnv1a_64,
    fnv1a_hex,
    seeded_sample,
    seeded_shuffle,
)

from reference_impls import fnv1a_64_ref, seeded_shuffle_ref, splitmix64_stream_ref


def test_fnv1a_known_vectors():
    # published FNV-1a 64-bit digests
    assert fnv1a_64(b"") == 0xCBF29CE484222325
    assert fnv1a_64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a_64("foobar") == 0x85944171F73967E8


def test_fnv1a_hex_format():
    assert fnv1a_hex(b"") == "cbf29ce484222325"
    assert len(fnv1a_hex("anything")) == 16


@given(st.text(max_size=100))
def test_fnv1a_matches_reference(text):
    assert fnv1a_64(text) == fnv1a_64_ref(text)


@pytest.mark.parametrize("seed", [0, 1, 2, 42, 2**63, 2**64 - 1])
def test_splitmix_stream_matches_reference(seed):
    rng = SplitMix64(seed)
    mine = [rng.next_u64() for _ in range(50)]
    assert mine == splitmix64_stream_ref(seed, 50)


def test_shuffle_matches_reference_and_is_deterministic():
    items = list(range(37))
    assert seeded_shuffle(items, 7) == seeded_shuffle_ref(items, 7)
    assert seeded_shuffle(items, 7) == seeded_shuffle(items, 7)
    assert seeded_shuffle(items, 7) != seeded_shuffle(items, 8)


def test_shuffle_is_permutation():
    items = [f"x{i}" for i in range(25)]
    shuffled = seeded_shuffle(items, 3)
    assert sorted(shuffled) == sorted(items)


def test_seeded_sample_prefix_of_shuffle():
    items = list(range(30))
    assert seeded_sample(items, 10, 5) == seeded_shuffle(items, 5)[:10]
    with pytest.raises(ValueError):
        seeded_sample(items, 31, 5)
