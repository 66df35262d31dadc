import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ceceval.embedder import (
    CacheCorrupt,
    DimensionMismatch,
    EmbeddingCache,
    MissingVector,
    ProviderConfig,
    ProviderKind,
    ProviderUnavailable,
    cosine,
    embed_batch,
    get_embedder,
)
from ceceval.hashutil import fnv1a_hex

from reference_impls import fnv1a_64_ref, hashed_bow_ref

HASHED = ProviderConfig(kind=ProviderKind.HASHED_BOW, dimension=256)


def write_vector_file(path, texts_to_vectors, provider="external"):
    with open(path, "w", encoding="utf-8") as fh:
        for text, vector in texts_to_vectors.items():
            record = {
                "provider": provider,
                "hash": fnv1a_hex(text),
                "text_len": len(text),
                "vector": list(vector),
            }
            fh.write(json.dumps(record) + "\n")
    return str(path)


class TestProviderConfig:
    def test_remote_requires_endpoint(self):
        with pytest.raises(ValueError):
            ProviderConfig(kind=ProviderKind.REMOTE)

    def test_precomputed_requires_cache_path(self):
        with pytest.raises(ValueError):
            ProviderConfig(kind=ProviderKind.PRECOMPUTED)

    def test_hashed_bow_default_dimension(self):
        assert ProviderConfig(kind=ProviderKind.HASHED_BOW).dimension == 256

    def test_provider_ids(self):
        assert HASHED.provider_id == "hashed-bow-256"
        remote = ProviderConfig(
            kind=ProviderKind.REMOTE, endpoint="http://x", model_name="mini"
        )
        assert remote.provider_id == "remote-mini"


class TestHashedBow:
    def test_empty_texts_are_zero_vectors(self):
        matrix = embed_batch(HASHED, ["", ""])
        assert matrix.rows.shape == (2, 256)
        assert np.all(matrix.rows == 0.0)

    def test_same_text_identical_rows(self):
        matrix = embed_batch(HASHED, ["warming rose", "warming rose"])
        assert np.array_equal(matrix.rows[0], matrix.rows[1])

    def test_cat_cat_dog_against_fnv_reference(self):
        matrix = embed_batch(HASHED, ["cat cat dog"])
        expected = np.asarray(hashed_bow_ref("cat cat dog", 256))
        assert np.allclose(matrix.rows[0], expected, atol=1e-12)
        # also spell out the bucket structure per the FNV reference
        cat_bucket = fnv1a_64_ref("cat") % 256
        dog_bucket = fnv1a_64_ref("dog") % 256
        raw = np.zeros(256)
        raw[cat_bucket] += 2
        raw[dog_bucket] += 1
        assert np.allclose(matrix.rows[0], raw / np.linalg.norm(raw))

    def test_rows_unit_or_zero(self):
        matrix = embed_batch(HASHED, ["a b c", "", "x y", "a a a a"])
        norms = np.linalg.norm(matrix.rows, axis=1)
        for norm in norms:
            assert norm == 0.0 or abs(norm - 1.0) <= 1e-9

    def test_nonnegative_components(self):
        matrix = embed_batch(HASHED, ["warming melts ice", "ice ice ice"])
        assert np.all(matrix.rows >= 0.0)

    def test_token_permutation_invariance(self):
        a = embed_batch(HASHED, ["a b"]).rows[0]
        b = embed_batch(HASHED, ["b a"]).rows[0]
        assert np.array_equal(a, b)

    @given(st.lists(st.sampled_from(["ice", "melt", "sun", "co2"]), min_size=1, max_size=6))
    def test_matches_reference_bow(self, words):
        text = " ".join(words)
        mine = embed_batch(HASHED, [text]).rows[0]
        assert np.allclose(mine, hashed_bow_ref(text, 256), atol=1e-12)

    def test_order_preserved(self):
        matrix = embed_batch(HASHED, ["alpha", "beta"])
        assert np.allclose(matrix.rows[0], hashed_bow_ref("alpha", 256))
        assert np.allclose(matrix.rows[1], hashed_bow_ref("beta", 256))

    def test_empty_batch(self):
        matrix = embed_batch(HASHED, [])
        assert len(matrix) == 0


class TestCosine:
    def test_identity(self):
        v = np.array([0.3, 0.4, 0.5])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        import math

        value = cosine([1 / math.sqrt(2), 1 / math.sqrt(2)], [1.0, 0.0])
        assert value == pytest.approx(math.sqrt(2) / 2, abs=1e-9)

    def test_zero_vector_rule(self):
        assert cosine([0.0, 0.0], [1.0, 0.0]) == 0.0
        assert cosine([0.0, 0.0], [0.0, 0.0]) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cosine([1.0], [1.0, 0.0])

    @given(
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
        st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    )
    def test_symmetry_and_range(self, u, v):
        assert cosine(u, v) == pytest.approx(cosine(v, u), abs=1e-12)
        assert -1.0 <= cosine(u, v) <= 1.0


class TestCache:
    def test_cold_warm_bit_identical(self, tmp_path):
        cache_file = str(tmp_path / "cache.jsonl")
        cfg = ProviderConfig(
            kind=ProviderKind.HASHED_BOW, dimension=64, cache_path=cache_file
        )
        texts = ["ice melts fast", "oceans warm", ""]
        cold = embed_batch(cfg, texts).rows.copy()

        from ceceval.embedder import reset_embedders

        reset_embedders()  # force re-reading the persisted cache
        warm_embedder = get_embedder(cfg)
        warm = warm_embedder.embed_batch(texts).rows
        assert np.array_equal(cold, warm)

    def test_cache_file_schema(self, tmp_path):
        cache_file = tmp_path / "cache.jsonl"
        cfg = ProviderConfig(
            kind=ProviderKind.HASHED_BOW, dimension=16, cache_path=str(cache_file)
        )
        embed_batch(cfg, ["hello world"])
        record = json.loads(cache_file.read_text().splitlines()[0])
        assert set(record) == {"provider", "hash", "text_len", "vector"}
        assert record["provider"] == "hashed-bow-16"
        assert record["hash"] == fnv1a_hex("hello world")
        assert record["text_len"] == len("hello world")

    def test_corrupt_cache_raises(self, tmp_path):
        cache_file = tmp_path / "cache.jsonl"
        cache_file.write_text('{"provider": "x"\n', encoding="utf-8")
        with pytest.raises(CacheCorrupt):
            EmbeddingCache(cache_file)


class TestConcurrency:
    def test_parallel_embedding_with_shared_cache(self, tmp_path):
        from concurrent.futures import ThreadPoolExecutor

        cache_file = str(tmp_path / "cache.jsonl")
        cfg = ProviderConfig(
            kind=ProviderKind.HASHED_BOW, dimension=32, cache_path=cache_file
        )
        texts = [f"sentence number {i}" for i in range(20)]
        serial = embed_batch(cfg, texts).rows.copy()

        def worker(offset):
            rotated = texts[offset:] + texts[:offset]
            return embed_batch(cfg, rotated).rows

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(worker, range(8)))
        for offset, rows in enumerate(results):
            rotated_serial = np.vstack([serial[(offset + i) % 20] for i in range(20)])
            assert np.array_equal(rows, rotated_serial)

        # every key persisted at most once despite racing writers
        lines = [json.loads(l) for l in open(cache_file, encoding="utf-8")]
        keys = [(r["provider"], r["hash"]) for r in lines]
        assert len(keys) == len(set(keys))
        assert len(keys) == 20


class TestPrecomputed:
    def test_lookup_and_normalization(self, tmp_path):
        store = write_vector_file(
            tmp_path / "vectors.jsonl", {"g1": [2.0, 0.0], "g2": [0.0, 5.0]}
        )
        cfg = ProviderConfig(kind=ProviderKind.PRECOMPUTED, cache_path=store)
        matrix = embed_batch(cfg, ["g1", "g2"])
        assert np.allclose(matrix.rows, [[1.0, 0.0], [0.0, 1.0]])

    def test_missing_vector(self, tmp_path):
        store = write_vector_file(tmp_path / "vectors.jsonl", {"g1": [1.0, 0.0]})
        cfg = ProviderConfig(kind=ProviderKind.PRECOMPUTED, cache_path=store)
        with pytest.raises(MissingVector):
            embed_batch(cfg, ["unknown text"])


class TestRemote:
    def make_cfg(self, endpoint, **kw):
        return ProviderConfig(
            kind=ProviderKind.REMOTE,
            endpoint=endpoint,
            model_name="mini",
            backoff_base=0.01,
            **kw,
        )

    def test_happy_path_and_normalization(self, scripted_server):
        server = scripted_server(
            [(200, {"vectors": [[3.0, 4.0], [0.0, 2.0]], "dim": 2, "model": "mini"})]
        )
        matrix = embed_batch(self.make_cfg(server.endpoint), ["a", "b"])
        assert np.allclose(matrix.rows, [[0.6, 0.8], [0.0, 1.0]])
        assert server.requests[0]["path"] == "/embed"
        assert server.requests[0]["body"] == {"texts": ["a", "b"], "model": "mini"}

    def test_retry_on_5xx_then_success(self, scripted_server):
        server = scripted_server(
            [
                (500, {"error": "boom"}),
                (200, {"vectors": [[1.0, 0.0]], "dim": 2, "model": "mini"}),
            ]
        )
        matrix = embed_batch(self.make_cfg(server.endpoint), ["a"])
        assert len(server.requests) == 2
        assert np.allclose(matrix.rows, [[1.0, 0.0]])

    def test_gives_up_after_retries(self, scripted_server):
        server = scripted_server([(503, {"error": "down"})])
        with pytest.raises(ProviderUnavailable):
            embed_batch(self.make_cfg(server.endpoint, max_retries=2), ["a"])
        assert len(server.requests) == 3  # initial + 2 retries

    def test_dimension_mismatch_detected(self, scripted_server):
        server = scripted_server(
            [(200, {"vectors": [[1.0, 0.0], [1.0]], "dim": 2, "model": "mini"})]
        )
        with pytest.raises(DimensionMismatch):
            embed_batch(self.make_cfg(server.endpoint), ["a", "b"])

    def test_remote_results_cached(self, scripted_server, tmp_path):
        server = scripted_server(
            [(200, {"vectors": [[1.0, 0.0]], "dim": 2, "model": "mini"})]
        )
        cfg = self.make_cfg(server.endpoint, cache_path=str(tmp_path / "c.jsonl"))
        first = embed_batch(cfg, ["a"]).rows
        second = embed_batch(cfg, ["a"]).rows
        assert np.array_equal(first, second)
        assert len(server.requests) == 1  # second call was a cache hit
