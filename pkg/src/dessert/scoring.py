"""Inner and outer aggregations for set relevance scores.

The inner aggregation collapses one query vector's similarities to a target
set into a scalar; every shipped kind is sandwiched between beta*max and
alpha*max of its input (the averaged kinds only up to a 1/m factor in the
lower bound). The outer aggregation is a weighted mean over query vectors.
All score math runs in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PHI_KINDS = ("identity", "exp-minus-one", "debiased-sigmoid")


def _phi_identity(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _phi_exp_minus_one(x: np.ndarray) -> np.ndarray:
    return np.expm1(x)


def _phi_debiased_sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64))) - 0.5


def _infimum_phi_ratio(phi, points: int = 200_001) -> float:
    """Numeric infimum of phi(x)/x on (0, 1], the scalar lower-maximality bound."""
    x = np.linspace(0.0, 1.0, points)[1:]
    return float(np.min(phi(x) / x))


_PHI_TABLE = {
    # kind: (function, alpha, beta) as scalar bounds on [0, 1]
    "identity": (_phi_identity, 1.0, 1.0),
    "exp-minus-one": (_phi_exp_minus_one, float(np.e - 1.0), 1.0),
    "debiased-sigmoid": (
        _phi_debiased_sigmoid,
        0.25,
        _infimum_phi_ratio(_phi_debiased_sigmoid),
    ),
}


@dataclass(frozen=True)
class InnerAggregation:
    """An inner aggregation with its declared maximality bounds.

    ``alpha`` and ``beta`` are the scalar bounds; for avg-phi kinds the
    instantiated lower bound is beta/m for an m-element input (beta_for).
    """

    kind: str
    phi: str | None
    alpha: float
    beta: float

    def beta_for(self, m: int) -> float:
        """Lower maximality bound instantiated at set size m."""
        return self.beta if self.kind == "max" else self.beta / m

    def apply(self, sims) -> float:
        """Aggregate one similarity vector."""
        if self.kind == "max":
            return sigma_max(sims)
        return sigma_avg_phi(sims, self.phi)

    def apply_rows(self, sims: np.ndarray) -> np.ndarray:
        """Aggregate each row of an (m_q, m) similarity matrix."""
        if self.kind == "max":
            return sims.max(axis=1)
        phi_fn = _PHI_TABLE[self.phi][0]
        return phi_fn(sims).mean(axis=1)


def phi_function(phi: str):
    """The scalar map behind an avg-phi aggregation, vectorized over arrays."""
    if phi not in _PHI_TABLE:
        raise ValueError(f"unknown phi kind: {phi!r} (choose from {PHI_KINDS})")
    return _PHI_TABLE[phi][0]


def max_aggregation() -> InnerAggregation:
    """The max inner aggregation; bounds (alpha, beta) = (1, 1)."""
    return InnerAggregation(kind="max", phi=None, alpha=1.0, beta=1.0)


def avg_phi_aggregation(phi: str) -> InnerAggregation:
    """Mean-of-phi inner aggregation with the bounds recorded for phi."""
    if phi not in _PHI_TABLE:
        raise ValueError(f"unknown phi kind: {phi!r} (choose from {PHI_KINDS})")
    _, alpha, beta = _PHI_TABLE[phi]
    return InnerAggregation(kind="avg-phi", phi=phi, alpha=alpha, beta=beta)


@dataclass(frozen=True)
class Scorer:
    """Inner aggregation plus optional per-query-vector weights (default all ones)."""

    inner: InnerAggregation
    weights: np.ndarray | None = None


def default_scorer() -> Scorer:
    """Mean of max similarities: sigma = max, outer = unweighted mean."""
    return Scorer(inner=max_aggregation(), weights=None)


def sigma_max(sims) -> float:
    """Maximum similarity; (alpha, beta) = (1, 1)."""
    sims = np.asarray(sims, dtype=np.float64)
    if sims.size == 0:
        raise ValueError("empty input: inner aggregation needs at least one similarity")
    return float(sims.max())


def sigma_avg_phi(sims, phi: str) -> float:
    """Mean of phi over the similarities; entries must lie in [0, 1]."""
    if phi not in _PHI_TABLE:
        raise ValueError(f"unknown phi kind: {phi!r} (choose from {PHI_KINDS})")
    sims = np.asarray(sims, dtype=np.float64)
    if sims.size == 0:
        raise ValueError("empty input: inner aggregation needs at least one similarity")
    if sims.min() < 0.0 or sims.max() > 1.0:
        raise ValueError("out of range: similarities must lie in [0, 1]")
    phi_fn = _PHI_TABLE[phi][0]
    return float(phi_fn(sims).mean())


def outer_aggregate(per_query_scores, weights) -> float:
    """Weighted mean over query vectors: (1/m_q) * sum w_j * score_j."""
    scores = np.asarray(per_query_scores, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if scores.shape != w.shape:
        raise ValueError(
            f"length mismatch: {scores.shape[0] if scores.ndim else 0} scores "
            f"vs {w.shape[0] if w.ndim else 0} weights"
        )
    if w.size and (w.min() < 0.0 or w.max() > 1.0):
        raise ValueError("out of range: weights must lie in [0, 1]")
    return float(np.mean(w * scores))
