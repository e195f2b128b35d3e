"""Index build/query semantics, estimator quality, and determinism."""

import numpy as np
import pytest

from dessert import synth
from dessert.index import (
    PROFILES,
    FilterConfig,
    IndexConfig,
    apply_profile,
    build_index,
    query,
    score_candidate,
)
from dessert.lsh import hash_matrix
from dessert.oracle import brute_force_search, exact_relevance
from dessert.sketch import accumulate_collisions
from dessert.storage import save_index


def no_filter_config(**kwargs) -> IndexConfig:
    kwargs.setdefault("filter", FilterConfig(enabled=False))
    return IndexConfig(**kwargs)


class TestBuild:
    def test_minimal_build(self):
        index = build_index([(7, np.ones((1, 4)))], no_filter_config(d=4, C=2, L=3))
        assert index.n_docs == 1
        assert index.sketches[0].m == 1
        assert list(index.doc_ids) == [7]

    def test_deterministic_builds_serialize_identically(self, tmp_path):
        docs = synth.random_corpus(10, 3, 8, seed=0)
        cfg = IndexConfig(d=8, C=3, L=16, seed=5, filter=FilterConfig(enabled=True, centroids=4))
        a, b = tmp_path / "a.dsri", tmp_path / "b.dsri"
        save_index(a, build_index(docs, cfg))
        save_index(b, build_index(docs, cfg))
        assert a.read_bytes() == b.read_bytes()

    def test_mixed_dimensions_rejected(self):
        docs = [(0, np.ones((2, 4))), (1, np.ones((2, 5)))]
        with pytest.raises(ValueError, match="dimension"):
            build_index(docs, no_filter_config(d=4))

    def test_empty_collection_rejected(self):
        with pytest.raises(ValueError, match="empty collection"):
            build_index([], no_filter_config(d=4))

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="empty set"):
            build_index([(0, np.ones((0, 4)))], no_filter_config(d=4))

    def test_zero_vector_rejected(self):
        docs = [(0, np.array([[1.0, 1.0], [0.0, 0.0]]))]
        with pytest.raises(ValueError, match="zero vector"):
            build_index(docs, no_filter_config(d=2))

    def test_duplicate_doc_ids_rejected(self):
        docs = [(3, np.ones((1, 2))), (3, np.ones((1, 2)))]
        with pytest.raises(ValueError, match="duplicate"):
            build_index(docs, no_filter_config(d=2))


class TestProfiles:
    def test_all_presets_exist(self):
        assert set(PROFILES) == {
            "msmarco-k10-fast", "msmarco-k10-slow",
            "msmarco-k1000-fast", "msmarco-k1000-slow",
        }

    def test_default_preset_values(self):
        cfg = apply_profile(IndexConfig(d=16), "msmarco-k10-fast")
        assert (cfg.C, cfg.L) == (7, 32)
        assert (cfg.filter.probe, cfg.filter.k_filter) == (1, 4096)

    def test_unknown_profile(self):
        with pytest.raises(ValueError, match="profile"):
            apply_profile(IndexConfig(d=16), "nope")


class TestScoreCandidate:
    def test_self_query_scores_one(self):
        rng = np.random.default_rng(0)
        S = rng.standard_normal((5, 8))
        index = build_index([(0, S)], no_filter_config(d=8, C=3, L=16))
        codes = hash_matrix(index.family, S)
        assert score_candidate(index, 0, codes) == pytest.approx(1.0)

    def test_disjoint_buckets_score_zero(self):
        # Antipodal single-vector doc: with C=1 every code is complemented.
        v = np.random.default_rng(1).standard_normal(8)
        index = build_index([(0, v[None, :])], no_filter_config(d=8, C=1, L=32))
        codes = hash_matrix(index.family, -v[None, :])
        assert score_candidate(index, 0, codes) == 0.0

    def test_small_instance_tracks_exact_score(self):
        rng = np.random.default_rng(2)
        S = rng.standard_normal((4, 16))
        Q = rng.standard_normal((2, 16))
        index = build_index([(0, S)], no_filter_config(d=16, C=2, L=512, seed=3))
        est = score_candidate(index, 0, hash_matrix(index.family, Q))
        assert est == pytest.approx(exact_relevance(Q, S), abs=0.05)

    def test_index_out_of_range(self):
        index = build_index([(0, np.ones((1, 4)))], no_filter_config(d=4))
        codes = hash_matrix(index.family, np.ones((1, 4)))
        with pytest.raises(IndexError):
            score_candidate(index, 1, codes)


class TestQuery:
    def test_single_doc_always_returned(self):
        rng = np.random.default_rng(3)
        index = build_index([(9, rng.standard_normal((4, 8)))], no_filter_config(d=8))
        out = query(index, rng.standard_normal((2, 8)), top_k=5)
        assert [doc for doc, _ in out] == [9]

    def test_exhaustive_ranking_without_filter(self):
        rng = np.random.default_rng(4)
        docs = synth.random_corpus(12, 4, 8, seed=5)
        index = build_index(docs, no_filter_config(d=8, C=2, L=32, seed=6))
        Q = rng.standard_normal((3, 8))
        out = query(index, Q, top_k=12)
        assert len(out) == 12
        scores = [s for _, s in out]
        assert scores == sorted(scores, reverse=True)

    def test_matches_manual_rescoring(self):
        """Prefilter off == scoring every set with the public single-vector ops."""
        docs = synth.random_corpus(8, 3, 8, seed=7)
        index = build_index(docs, no_filter_config(d=8, C=2, L=16, seed=8))
        rng = np.random.default_rng(9)
        Q = rng.standard_normal((2, 8))
        out = dict(query(index, Q, top_k=8))

        codes = hash_matrix(index.family, Q)
        for i, (doc_id, _) in enumerate(docs):
            per_q = []
            for q in range(2):
                counts = accumulate_collisions(index.sketches[i], codes[q])
                per_q.append(float(index.lookup.table[counts].max()))
            assert out[doc_id] == pytest.approx(np.mean(per_q), abs=0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(10)
        S = rng.standard_normal((6, 8))
        Q = rng.standard_normal((2, 8))
        a = build_index([(0, S)], no_filter_config(d=8, C=3, L=16, seed=11))
        b = build_index([(0, S[::-1])], no_filter_config(d=8, C=3, L=16, seed=11))
        assert query(a, Q, 1) == query(b, Q, 1)

    def test_planted_match_found(self):
        docs = synth.random_corpus(20, 8, 16, seed=12)
        index = build_index(docs, no_filter_config(d=16, C=4, L=128, seed=13))
        rng = np.random.default_rng(14)
        hits = 0
        for t in range(20):
            Q = synth.noisy_copy(docs[t][1], rng)
            hits += query(index, Q, 1)[0][0] == t
        assert hits >= 19

    def test_agrees_with_oracle_top1(self):
        docs = synth.random_corpus(15, 6, 16, seed=15)
        index = build_index(docs, no_filter_config(d=16, C=3, L=256, seed=16))
        rng = np.random.default_rng(17)
        agree = 0
        for t in range(10):
            Q = synth.noisy_copy(docs[rng.integers(0, 15)][1], rng)
            agree += query(index, Q, 1)[0][0] == brute_force_search(docs, Q, 1)[0][0]
        assert agree >= 9

    def test_filter_limits_candidates(self):
        docs, _ = synth.clustered_corpus(40, 8, m=3, d=8, seed=18)
        cfg = IndexConfig(
            d=8, C=3, L=16, seed=19,
            filter=FilterConfig(enabled=True, centroids=8, probe=1, k_filter=5),
        )
        index = build_index(docs, cfg)
        out = query(index, docs[0][1], top_k=40)
        assert len(out) <= 5  # no backfill beyond the filtered candidates

    def test_query_does_not_mutate_index(self, tmp_path):
        docs = synth.random_corpus(6, 3, 8, seed=20)
        cfg = IndexConfig(d=8, C=2, L=8, seed=21, filter=FilterConfig(enabled=True, centroids=3))
        index = build_index(docs, cfg)
        before = tmp_path / "before.dsri"
        save_index(before, index)
        query(index, np.random.default_rng(22).standard_normal((2, 8)), top_k=3)
        after = tmp_path / "after.dsri"
        save_index(after, index)
        assert before.read_bytes() == after.read_bytes()

    def test_threads_do_not_change_results(self):
        docs = synth.random_corpus(30, 4, 8, seed=23)
        index = build_index(docs, no_filter_config(d=8, C=2, L=16, seed=24))
        Q = np.random.default_rng(25).standard_normal((3, 8))
        assert query(index, Q, 10, threads=1) == query(index, Q, 10, threads=4)

    def test_validation_errors(self):
        index = build_index([(0, np.ones((1, 4)))], no_filter_config(d=4))
        with pytest.raises(ValueError, match="empty query"):
            query(index, np.ones((0, 4)), 1)
        with pytest.raises(ValueError, match="invalid parameter"):
            query(index, np.ones((1, 4)), 0)
        with pytest.raises(ValueError, match="dimension"):
            query(index, np.ones((1, 5)), 1)
        with pytest.raises(ValueError, match="zero vector"):
            query(index, np.zeros((1, 4)), 1)


class TestEstimatorConcentration:
    def test_variance_shrinks_like_one_over_L(self):
        """var(score) * L stays within a factor of two across L = 16, 64, 256."""
        rng = np.random.default_rng(26)
        S = rng.standard_normal((6, 16))
        Q = rng.standard_normal((3, 16))
        scaled = []
        for L in (16, 64, 256):
            scores = []
            for seed in range(150):
                cfg = no_filter_config(d=16, C=2, L=L, seed=seed)
                index = build_index([(0, S)], cfg)
                scores.append(score_candidate(index, 0, hash_matrix(index.family, Q)))
            scaled.append(np.var(scores) * L)
        assert max(scaled) / min(scaled) < 2.0
