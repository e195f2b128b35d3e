"""Build and query the collision-count search index.

Building hashes every set once and packs the codes into per-set TinyTables;
querying hashes the query set once, optionally shortlists candidates through
the centroid prefilter, turns per-candidate collision counts into similarity
estimates via the precomputed lookup, aggregates, and ranks. The index is
immutable after build and safe for concurrent queries.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .lsh import SimLookup, SrpFamily, build_sim_lookup, hash_matrix, sample_srp_family
from .prefilter import (
    MAX_TRAIN_SAMPLES,
    CentroidIndex,
    Centroids,
    build_centroid_index,
    filter_candidates,
    train_centroids,
)
from .scoring import Scorer, avg_phi_aggregation, max_aggregation, phi_function
from .sketch import TinyTable, build_tiny_table, collision_keys

# Ranked output: (doc_id, score) by descending score, ascending id on ties.
RankedResults = list[tuple[int, float]]


@dataclass(frozen=True)
class FilterConfig:
    """Centroid prefilter settings; centroids=0 means ceil(sqrt(total vectors))."""

    enabled: bool = True
    centroids: int = 0
    iters: int = 10
    probe: int = 1
    k_filter: int = 4096


@dataclass(frozen=True)
class IndexConfig:
    d: int
    C: int = 7
    L: int = 32
    seed: int = 0
    inner_kind: str = "max"
    phi: str | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)

    @property
    def code_range(self) -> int:
        return 1 << self.C

    def scorer(self) -> Scorer:
        inner = max_aggregation() if self.inner_kind == "max" else avg_phi_aggregation(self.phi)
        return Scorer(inner=inner, weights=None)


# Tuned operating points; values are IndexConfig/FilterConfig overrides.
PROFILES: dict[str, dict] = {
    "msmarco-k10-fast": {"C": 7, "L": 32, "k_filter": 4096, "probe": 1},
    "msmarco-k10-slow": {"C": 7, "L": 64, "k_filter": 4096, "probe": 2},
    "msmarco-k1000-fast": {"C": 6, "L": 32, "k_filter": 8192, "probe": 4},
    "msmarco-k1000-slow": {"C": 7, "L": 32, "k_filter": 16384, "probe": 4},
}


def apply_profile(config: IndexConfig, name: str) -> IndexConfig:
    """Overlay a named profile's C/L and prefilter knobs onto a config."""
    if name not in PROFILES:
        raise ValueError(f"unknown profile: {name!r} (choose from {sorted(PROFILES)})")
    p = PROFILES[name]
    return replace(
        config,
        C=p["C"],
        L=p["L"],
        filter=replace(config.filter, probe=p["probe"], k_filter=p["k_filter"]),
    )


@dataclass
class DessertIndex:
    """N per-set sketches plus the shared hash family, lookup, and prefilter."""

    config: IndexConfig
    family: SrpFamily
    lookup: SimLookup
    sketches: list[TinyTable]
    doc_ids: np.ndarray
    sizes: np.ndarray
    filter: tuple[Centroids, CentroidIndex] | None

    @property
    def n_docs(self) -> int:
        return len(self.sketches)

    @property
    def m_max(self) -> int:
        return int(self.sizes.max())


def _validated_docs(docs, d: int) -> list[tuple[int, np.ndarray]]:
    out = []
    seen = set()
    for doc_id, S in docs:
        doc_id = int(doc_id)
        if doc_id in seen:
            raise ValueError(f"duplicate doc id: {doc_id}")
        seen.add(doc_id)
        X = np.asarray(S, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError(f"empty set: document {doc_id} has no vectors")
        if X.shape[1] != d:
            raise ValueError(
                f"dimension mismatch: document {doc_id} has d={X.shape[1]}, expected {d}"
            )
        if np.any(np.linalg.norm(X, axis=1) == 0.0):
            raise ValueError(f"zero vector in document {doc_id}")
        out.append((doc_id, X))
    if not out:
        raise ValueError("empty collection: nothing to index")
    return out


def build_index(docs, config: IndexConfig) -> DessertIndex:
    """Sketch every (doc_id, vector set) pair and build the optional prefilter.

    Deterministic in the inputs and config.seed: the same call yields a
    byte-identical serialized index.
    """
    items = _validated_docs(docs, config.d)
    family = sample_srp_family(config.d, config.C, config.L, config.seed)
    lookup = build_sim_lookup(config.C, config.L)
    r = config.code_range

    sketches = []
    for _, X in items:
        codes = hash_matrix(family, X)
        sketches.append(build_tiny_table(codes, config.L, r))

    filt = None
    if config.filter.enabled:
        pool = np.concatenate([X for _, X in items], axis=0)
        rng = np.random.default_rng([config.seed, 0xF117E2])
        if pool.shape[0] > MAX_TRAIN_SAMPLES:
            pool = pool[rng.choice(pool.shape[0], size=MAX_TRAIN_SAMPLES, replace=False)]
        k = config.filter.centroids or math.isqrt(pool.shape[0] - 1) + 1
        k = min(k, pool.shape[0])
        centroids = train_centroids(pool, k, config.filter.iters, config.seed)
        cindex = build_centroid_index([X for _, X in items], centroids)
        filt = (centroids, cindex)

    return DessertIndex(
        config=config,
        family=family,
        lookup=lookup,
        sketches=sketches,
        doc_ids=np.array([doc_id for doc_id, _ in items], dtype=np.uint64),
        sizes=np.array([s.m for s in sketches], dtype=np.int64),
        filter=filt,
    )


def _sim_table_for(index: DessertIndex, scorer: Scorer) -> np.ndarray:
    """Count -> aggregand table for the scorer's inner aggregation.

    For sigma = max the raw similarity table is used directly: it is strictly
    increasing past zero, so the row maximum can be taken on integer counts
    before the lookup. For avg-phi kinds, phi is folded into the table once so
    the per-candidate work is a single gather and mean.
    """
    if scorer.inner.kind == "max":
        return index.lookup.table
    return phi_function(scorer.inner.phi)(index.lookup.table)


def _score_one(
    index: DessertIndex,
    i: int,
    query_codes: np.ndarray,
    scorer: Scorer,
    weights: np.ndarray,
    sim_table: np.ndarray,
) -> float:
    """Score one candidate from its sorted collision-key stream.

    Runs are (query row, stored vector) pairs; run lengths are collision
    counts. Work is proportional to the number of collision events, never to
    m_q * m, and query rows that collide with nothing keep score 0 exactly
    (sim_table[0] == 0 for every shipped aggregation).
    """
    table = index.sketches[i]
    keys = collision_keys(table, query_codes)
    m_q = query_codes.shape[0]
    per_query = np.zeros(m_q)
    if keys.size:
        keys.sort()
        run_starts = np.flatnonzero(np.diff(keys)) + 1
        counts = np.diff(run_starts, prepend=0, append=keys.size)
        rows = keys[np.concatenate(([0], run_starts))] // table.m
        # Rows are sorted, so occupied segments for reduceat are contiguous.
        row_bounds = np.searchsorted(rows, np.arange(m_q + 1))
        occupied = row_bounds[:-1] < row_bounds[1:]
        seg_starts = row_bounds[:-1][occupied]
        if scorer.inner.kind == "max":
            # max(table[counts]) == table[max(counts)]: table is monotone in count.
            per_query[occupied] = sim_table[np.maximum.reduceat(counts, seg_starts)]
        else:
            per_query[occupied] = np.add.reduceat(sim_table[counts], seg_starts) / table.m
    return float(np.mean(weights * per_query))


def _resolve_weights(scorer: Scorer, m_q: int) -> np.ndarray:
    if scorer.weights is None:
        return np.ones(m_q)
    w = np.asarray(scorer.weights, dtype=np.float64)
    if w.shape != (m_q,):
        raise ValueError(f"length mismatch: {w.shape[0]} weights for {m_q} query vectors")
    if w.size and (w.min() < 0.0 or w.max() > 1.0):
        raise ValueError("out of range: weights must lie in [0, 1]")
    return w


def score_candidate(
    index: DessertIndex, i: int, query_codes: np.ndarray, scorer: Scorer | None = None
) -> float:
    """Estimated relevance of set i for a query hashed as an (m_q, L) code matrix.

    Per query vector: collision counts against sketch i, lookup to similarity
    estimates, inner aggregation; then the weighted mean across query vectors.
    """
    if not 0 <= i < index.n_docs:
        raise IndexError(f"set index out of range: {i} (N={index.n_docs})")
    query_codes = np.asarray(query_codes)
    if query_codes.ndim != 2 or query_codes.shape[1] != index.config.L:
        raise ValueError(
            f"expected (m_q, {index.config.L}) code matrix, got shape {query_codes.shape}"
        )
    scorer = scorer or index.config.scorer()
    weights = _resolve_weights(scorer, query_codes.shape[0])
    return _score_one(index, i, query_codes, scorer, weights, _sim_table_for(index, scorer))


def _score_chunk(
    index: DessertIndex,
    candidates: np.ndarray,
    query_codes: np.ndarray,
    scorer: Scorer,
    weights: np.ndarray,
) -> list[float]:
    sim_table = _sim_table_for(index, scorer)
    return [
        _score_one(index, int(i), query_codes, scorer, weights, sim_table)
        for i in candidates
    ]


def query(
    index: DessertIndex,
    Q,
    top_k: int,
    probe: int | None = None,
    k_filter: int | None = None,
    scorer: Scorer | None = None,
    threads: int = 1,
) -> RankedResults:
    """Rank the top_k sets for a query vector set.

    Q is hashed exactly once; candidates come from the centroid prefilter when
    it is enabled (no backfill if it returns fewer than top_k), otherwise all
    sets are scored. Results are independent of ``threads``.
    """
    if top_k < 1:
        raise ValueError(f"invalid parameter: top_k must be >= 1, got {top_k}")
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] == 0:
        raise ValueError("empty query: need at least one query vector")
    codes = hash_matrix(index.family, Q)

    scorer = scorer or index.config.scorer()
    weights = _resolve_weights(scorer, Q.shape[0])

    if index.filter is not None:
        centroids, cindex = index.filter
        cfg = index.config.filter
        candidates = filter_candidates(
            cindex,
            centroids,
            Q,
            cfg.probe if probe is None else probe,
            cfg.k_filter if k_filter is None else k_filter,
        )
    else:
        candidates = np.arange(index.n_docs)
    if len(candidates) == 0:
        return []

    if threads > 1 and len(candidates) > 1:
        chunks = np.array_split(candidates, min(threads, len(candidates)))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(
                lambda ch: _score_chunk(index, ch, codes, scorer, weights), chunks
            )
        scores = [s for part in parts for s in part]
    else:
        scores = _score_chunk(index, candidates, codes, scorer, weights)

    ranked = (
        (float(score), int(index.doc_ids[i]))
        for i, score in zip(candidates, scores)
    )
    best = heapq.nsmallest(top_k, ranked, key=lambda e: (-e[0], e[1]))
    return [(doc_id, score) for score, doc_id in best]
