"""Synthetic vector set corpora for benchmarks and statistical tests."""

from __future__ import annotations

import numpy as np


def random_unit_vectors(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    """n uniform directions on the unit sphere in R^d."""
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def random_corpus(n_docs: int, m: int, d: int, seed: int) -> list[tuple[int, np.ndarray]]:
    """n_docs sets of m random unit directions, with doc ids 0..n_docs-1."""
    rng = np.random.default_rng(seed)
    return [(i, random_unit_vectors(rng, m, d)) for i in range(n_docs)]


def noisy_copy(X: np.ndarray, rng: np.random.Generator, scale: float = 0.05) -> np.ndarray:
    """Perturb each vector by Gaussian noise scaled to its norm.

    scale=0.05 keeps an exact-oracle ranking of the source document stable,
    which is what the planted-match fixtures rely on.
    """
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return X + scale * norms * rng.standard_normal(X.shape)


def clustered_corpus(
    n_docs: int,
    n_clusters: int,
    m: int,
    d: int,
    seed: int,
    spread: float = 0.35,
) -> tuple[list[tuple[int, np.ndarray]], np.ndarray]:
    """Documents planted around cluster directions; returns (docs, home cluster per doc).

    Document i draws its m vectors as unit-normalized (center + spread*noise)
    around center i % n_clusters, so cluster structure is known by construction.
    """
    rng = np.random.default_rng(seed)
    centers = random_unit_vectors(rng, n_clusters, d)
    docs = []
    homes = np.zeros(n_docs, dtype=np.int64)
    for i in range(n_docs):
        h = i % n_clusters
        homes[i] = h
        X = centers[h] + spread * rng.standard_normal((m, d))
        docs.append((i, X / np.linalg.norm(X, axis=1, keepdims=True)))
    return docs, homes
