"""TinyTable layout against a naive map-of-lists oracle, plus the byte formula."""

import numpy as np
import pytest

from dessert.sketch import (
    HEADER_BYTES,
    TinyTable,
    accumulate_collisions,
    accumulate_collisions_batch,
    bucket,
    build_tiny_table,
    tiny_table_bytes,
    tiny_table_from_bytes,
    tiny_table_to_bytes,
)


def naive_table(codes: np.ndarray, L: int, r: int) -> dict:
    """Reference structure: (t, h) -> list of vector ids, ascending."""
    table = {}
    for j, row in enumerate(codes):
        for t in range(L):
            table.setdefault((t, int(row[t])), []).append(j)
    return table


def naive_counts(codes: np.ndarray, query_codes: np.ndarray) -> np.ndarray:
    m, L = codes.shape
    counts = np.zeros(m, dtype=np.int64)
    for j in range(m):
        counts[j] = sum(int(codes[j, t]) == int(query_codes[t]) for t in range(L))
    return counts


class TestBuild:
    def test_hand_traced_example(self):
        table = build_tiny_table(np.array([[2], [0], [2]]), L=1, r=4)
        np.testing.assert_array_equal(table.offsets[0], [0, 1, 1, 3, 3])
        np.testing.assert_array_equal(table.ids[0], [1, 0, 2])

    def test_single_element_set(self):
        table = build_tiny_table(np.zeros((1, 3), dtype=int), L=3, r=4)
        for t in range(3):
            np.testing.assert_array_equal(table.ids[t], [0])
            np.testing.assert_array_equal(table.offsets[t], [0, 1, 1, 1, 1])

    def test_code_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            build_tiny_table(np.array([[4]]), L=1, r=4)
        with pytest.raises(ValueError, match="out of range"):
            build_tiny_table(np.array([[-1]]), L=1, r=4)

    def test_empty_set(self):
        with pytest.raises(ValueError, match="empty set"):
            build_tiny_table(np.zeros((0, 2), dtype=int), L=2, r=4)

    def test_offsets_reconstruct_m(self):
        rng = np.random.default_rng(0)
        codes = rng.integers(0, 16, size=(37, 5))
        table = build_tiny_table(codes, L=5, r=16)
        assert np.all(table.offsets[:, 0] == 0)
        assert np.all(table.offsets[:, -1] == 37)

    def test_width_escalation(self):
        small = build_tiny_table(np.zeros((255, 1), dtype=int), L=1, r=2)
        assert small.offsets.dtype == np.uint8 and small.ids.dtype == np.uint8
        edge = build_tiny_table(np.zeros((256, 1), dtype=int), L=1, r=2)
        assert edge.offsets.dtype == np.uint16 and edge.ids.dtype == np.uint8
        wide = build_tiny_table(np.zeros((257, 1), dtype=int), L=1, r=2)
        assert wide.offsets.dtype == np.uint16 and wide.ids.dtype == np.uint16


class TestBucket:
    def test_hand_traced_buckets(self):
        table = build_tiny_table(np.array([[2], [0], [2]]), L=1, r=4)
        np.testing.assert_array_equal(bucket(table, 0, 2), [0, 2])
        np.testing.assert_array_equal(bucket(table, 0, 1), [])

    def test_out_of_range(self):
        table = build_tiny_table(np.array([[2], [0], [2]]), L=1, r=4)
        with pytest.raises(IndexError):
            bucket(table, 0, 4)
        with pytest.raises(IndexError):
            bucket(table, 1, 0)

    def test_view_semantics(self):
        table = build_tiny_table(np.array([[1], [1], [1]]), L=1, r=2)
        assert bucket(table, 0, 1).base is not None


class TestAccumulate:
    def test_full_collision(self):
        codes = np.array([[2, 1], [0, 1], [2, 0]])
        table = build_tiny_table(codes, L=2, r=4)
        np.testing.assert_array_equal(accumulate_collisions(table, codes[0]), [2, 1, 1])

    def test_no_collision(self):
        table = build_tiny_table(np.array([[2, 1], [0, 1], [2, 0]]), L=2, r=4)
        np.testing.assert_array_equal(accumulate_collisions(table, np.array([3, 3])), [0, 0, 0])

    def test_out_of_range_code(self):
        table = build_tiny_table(np.array([[2], [0]]), L=1, r=4)
        with pytest.raises(ValueError, match="out of range"):
            accumulate_collisions(table, np.array([4]))

    def test_reusable_buffer(self):
        codes = np.array([[2, 1], [0, 1], [2, 0]])
        table = build_tiny_table(codes, L=2, r=4)
        buf = np.full(10, 99, dtype=np.int32)
        out = accumulate_collisions(table, codes[1], out=buf)
        np.testing.assert_array_equal(out, [1, 2, 0])
        assert out.base is buf or out is buf[:3]

    def test_batch_matches_single(self):
        rng = np.random.default_rng(1)
        codes = rng.integers(0, 8, size=(19, 6))
        table = build_tiny_table(codes, L=6, r=8)
        queries = rng.integers(0, 8, size=(7, 6))
        batch = accumulate_collisions_batch(table, queries)
        for q in range(7):
            np.testing.assert_array_equal(batch[q], accumulate_collisions(table, queries[q]))


class TestOracleEquivalence:
    """Random instances must match the naive map exactly, bucket by bucket."""

    def test_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            m = int(rng.integers(1, 120))
            L = int(rng.integers(1, 16))
            r = 1 << int(rng.integers(1, 7))
            codes = rng.integers(0, r, size=(m, L))
            table = build_tiny_table(codes, L=L, r=r)
            ref = naive_table(codes, L, r)
            for t in range(L):
                for h in range(r):
                    np.testing.assert_array_equal(
                        bucket(table, t, h), ref.get((t, h), []), strict=False
                    )
            query = rng.integers(0, r, size=L)
            np.testing.assert_array_equal(
                accumulate_collisions(table, query), naive_counts(codes, query)
            )


class TestByteFormula:
    def test_paper_scale_figure(self):
        # 14,680 bytes per set; a million sets is about 14.7 GB.
        assert tiny_table_bytes(m=100, r=128, L=64) == 14_680
        assert tiny_table_bytes(m=100, r=128, L=64) * 10**6 == pytest.approx(14.7e9, rel=0.01)

    def test_minimal_arguments(self):
        assert tiny_table_bytes(m=1, r=2, L=1) == 28

    def test_naive_empty_buckets_comparison(self):
        # A 24-byte bucket object per (set, table, slot) would need ~196 GB
        # for a million empty sketches; the packed layout avoids that.
        naive = 10**6 * 64 * 128 * 24
        assert naive == pytest.approx(196.6e9, rel=0.01)
        assert tiny_table_bytes(m=100, r=128, L=64) * 10**6 < naive / 13

    def test_two_byte_regime(self):
        assert tiny_table_bytes(m=300, r=16, L=2) == HEADER_BYTES + 2 * (2 * 300 + 2 * 17)
        assert tiny_table_bytes(m=256, r=16, L=2) == HEADER_BYTES + 2 * (256 + 2 * 17)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(3)
        for m, L, r in ((1, 1, 2), (37, 5, 16), (300, 3, 8), (256, 2, 4)):
            codes = rng.integers(0, r, size=(m, L))
            table = build_tiny_table(codes, L=L, r=r)
            blob = tiny_table_to_bytes(table)
            assert len(blob) == tiny_table_bytes(m, r, L)
            back, pos = tiny_table_from_bytes(blob)
            assert pos == len(blob)
            np.testing.assert_array_equal(back.offsets, table.offsets)
            np.testing.assert_array_equal(back.ids, table.ids)

    def test_corrupt_offsets_rejected(self):
        table = build_tiny_table(np.array([[2], [0], [2]]), L=1, r=4)
        blob = bytearray(tiny_table_to_bytes(table))
        blob[HEADER_BYTES + 1] = 3  # break monotonicity: offsets become 0,3,1,3,3
        with pytest.raises(ValueError, match="corrupt|monotone"):
            tiny_table_from_bytes(bytes(blob))

    def test_truncated_rejected(self):
        blob = tiny_table_to_bytes(build_tiny_table(np.array([[1], [0]]), L=1, r=2))
        with pytest.raises(ValueError, match="truncated"):
            tiny_table_from_bytes(blob[:-1])
