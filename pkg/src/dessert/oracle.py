"""Exact brute-force reference scoring.

Ground truth for every statistical test: pairwise angular similarities
(1 - theta/pi) computed straight from arccos, exact relevance scores, and
exhaustive search. Deliberately allocation-simple and independent of the
hashing code paths, so estimator bugs cannot hide.
"""

from __future__ import annotations

import numpy as np

from .scoring import Scorer, default_scorer, outer_aggregate


def _as_nonzero_matrix(A, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, d) matrix, got shape {A.shape}")
    if np.any(np.linalg.norm(A, axis=1) == 0.0):
        raise ValueError(f"zero vector in {name}: angular similarity undefined")
    return A


def exact_pairwise_sims(Q, S) -> np.ndarray:
    """(m_q, m) matrix of angular similarities 1 - arccos(cos(q, x))/pi."""
    Q = _as_nonzero_matrix(Q, "Q")
    S = _as_nonzero_matrix(S, "S")
    if Q.shape[1] != S.shape[1]:
        raise ValueError(f"dimension mismatch: Q has d={Q.shape[1]}, S has d={S.shape[1]}")
    Qn = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    Sn = S / np.linalg.norm(S, axis=1, keepdims=True)
    cos = np.clip(Qn @ Sn.T, -1.0, 1.0)
    return 1.0 - np.arccos(cos) / np.pi


def exact_relevance(Q, S, scorer: Scorer | None = None) -> float:
    """Exact relevance score: inner aggregation per query row, weighted mean over rows."""
    scorer = scorer or default_scorer()
    sims = exact_pairwise_sims(Q, S)
    per_query = np.array([scorer.inner.apply(row) for row in sims])
    weights = scorer.weights if scorer.weights is not None else np.ones(len(per_query))
    return outer_aggregate(per_query, weights)


def brute_force_search(docs, Q, top_k: int, scorer: Scorer | None = None) -> list[tuple[int, float]]:
    """Score every document set exactly and return the top_k (doc_id, score).

    Sorted by descending score, ascending doc id on ties. O(m_q * m * N * d);
    this ranking defines ground truth for recall metrics.
    """
    docs = list(docs)
    if not docs:
        raise ValueError("empty collection: nothing to search")
    Q = _as_nonzero_matrix(Q, "Q")
    if top_k < 1:
        raise ValueError(f"invalid parameter: top_k must be >= 1, got {top_k}")
    scored = [(doc_id, exact_relevance(Q, S, scorer)) for doc_id, S in docs]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return scored[:top_k]
