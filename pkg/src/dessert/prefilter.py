"""Centroid prefilter: spherical k-means plus an inverted index to documents.

A lossy first stage: cluster a sample of item vectors, map each centroid to
the documents containing a vector assigned to it, and at query time shortlist
the documents touched most often by the probed centroids. Assignment uses
max dot product against unit centroids, i.e. minimum angular distance, to
match the angular similarity used downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Training sample cap; larger pools are subsampled with the training seed.
MAX_TRAIN_SAMPLES = 1 << 20


@dataclass(frozen=True)
class Centroids:
    """k unit-norm centroid directions with the seed that produced them."""

    k: int
    seed: int
    vectors: np.ndarray


@dataclass(frozen=True)
class CentroidIndex:
    """Per-centroid postings of ascending, deduplicated document indices."""

    n_docs: int
    postings: list[np.ndarray]


def _unit_rows(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, d) matrix, got shape {X.shape}")
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"zero vector in {name}: cannot assign to a centroid")
    return X / norms


def train_centroids(samples, k: int, iters: int, seed: int) -> Centroids:
    """Lloyd's iterations on the unit sphere from a seeded distinct-point init.

    Samples are normalized once; each update takes the mean of the assigned
    directions and renormalizes it. Empty clusters (including degenerate
    near-zero means) are reseeded from the points farthest from their
    assigned centroid. Deterministic in (sample order, k, iters, seed).
    """
    X = _unit_rows(samples, "samples")
    n = X.shape[0]
    if k < 1:
        raise ValueError(f"invalid parameter: k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"too few samples: need at least k={k}, got {n}")
    if iters < 1:
        raise ValueError(f"invalid parameter: iters must be >= 1, got {iters}")

    rng = np.random.default_rng(seed)
    centroids = X[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(iters):
        sims = X @ centroids.T
        assign = np.argmax(sims, axis=1)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, X)
        counts = np.bincount(assign, minlength=k)
        norms = np.linalg.norm(sums, axis=1)
        dead = (counts == 0) | (norms < 1e-12)
        if np.any(dead):
            # Farthest-assigned points (lowest similarity to their centroid),
            # one per dead cluster, in a deterministic order.
            order = np.argsort(sims[np.arange(n), assign], kind="stable")
            for slot, point in zip(np.flatnonzero(dead), order):
                sums[slot] = X[point]
                norms[slot] = 1.0
        centroids = sums / norms[:, None]
    return Centroids(k=k, seed=seed, vectors=centroids)


def build_centroid_index(docs, centroids: Centroids) -> CentroidIndex:
    """Invert centroid assignment: posting c lists the docs with a vector nearest c.

    Set semantics: a document appears at most once per posting no matter how
    many of its vectors map there.
    """
    postings: list[list[int]] = [[] for _ in range(centroids.k)]
    n_docs = 0
    for i, S in enumerate(docs):
        X = _unit_rows(S, f"document {i}")
        if X.shape[1] != centroids.vectors.shape[1]:
            raise ValueError(
                f"dimension mismatch: document {i} has d={X.shape[1]}, "
                f"centroids have d={centroids.vectors.shape[1]}"
            )
        nearest = np.unique(np.argmax(X @ centroids.vectors.T, axis=1))
        for c in nearest:
            postings[c].append(i)
        n_docs += 1
    if n_docs == 0:
        raise ValueError("empty collection: nothing to index")
    return CentroidIndex(
        n_docs=n_docs, postings=[np.asarray(p, dtype=np.int64) for p in postings]
    )


def filter_candidates(
    index: CentroidIndex, centroids: Centroids, Q, probe: int, k_filter: int
) -> np.ndarray:
    """Shortlist document indices by probed-centroid overlap with the query set.

    Each query vector probes its ``probe`` highest-dot-product centroids; a
    document scores one count per (query vector, probed centroid) posting it
    appears in. Returns up to k_filter indices, by descending count then
    ascending index; fewer when fewer documents were touched at all.
    """
    if probe < 1:
        raise ValueError(f"invalid parameter: probe must be >= 1, got {probe}")
    if k_filter < 1:
        raise ValueError(f"invalid parameter: k_filter must be >= 1, got {k_filter}")
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[0] == 0:
        raise ValueError(f"Q must be a non-empty (m_q, d) matrix, got shape {Q.shape}")
    if Q.shape[1] != centroids.vectors.shape[1]:
        raise ValueError(
            f"dimension mismatch: Q has d={Q.shape[1]}, "
            f"centroids have d={centroids.vectors.shape[1]}"
        )
    probe = min(probe, centroids.k)
    # Stable sort on negated dots: ties broken by ascending centroid id.
    sims = Q @ centroids.vectors.T
    probed = np.argsort(-sims, axis=1, kind="stable")[:, :probe]

    counts = np.zeros(index.n_docs, dtype=np.int64)
    for row in probed:
        for c in row:
            counts[index.postings[c]] += 1
    touched = np.flatnonzero(counts > 0)
    order = np.lexsort((touched, -counts[touched]))
    return touched[order][:k_filter]
