"""Closed-form tail bounds and sizing rules for collision-count search.

These are calculators, not proofs: the Chernoff rate gamma for a low-similarity
set outranking threshold tau, the Hoeffding lower tail for the true best set
underscoring, the table count L that makes both failure modes rare, and the
resulting query cost model. All logarithms are natural.
"""

from __future__ import annotations

import math

import numpy as np


def gamma_upper(s_max: float, tau: float, alpha: float) -> float:
    """Per-table Chernoff rate for Pr[sigma(estimates) >= tau] <= m * gamma^L.

    gamma = (s(a-t)/(t(1-s)))^(t/a) * (a(1-s)/(a-t)) for s = s_max, t = tau,
    a = alpha. Strictly increasing in s_max, strictly decreasing in tau, with
    limits 1 (tau -> alpha*s_max) and s_max (tau -> alpha).
    """
    if not 0.0 < s_max < 1.0:
        raise ValueError(f"domain violation: s_max must be in (0, 1), got {s_max}")
    if alpha < 1.0:
        raise ValueError(f"domain violation: alpha must be >= 1, got {alpha}")
    if not alpha * s_max < tau < alpha:
        raise ValueError(
            f"domain violation: tau must be in (alpha*s_max, alpha) = "
            f"({alpha * s_max}, {alpha}), got {tau}"
        )
    ratio = (s_max * (alpha - tau)) / (tau * (1.0 - s_max))
    return ratio ** (tau / alpha) * (alpha * (1.0 - s_max) / (alpha - tau))


def lower_tail_bound(L: int, Delta: float, beta: float) -> float:
    """Hoeffding bound: Pr[sigma(estimates) <= beta*s_max - Delta] <= 2e^(-2L Delta^2/beta^2)."""
    if L < 1:
        raise ValueError(f"domain violation: L must be >= 1, got {L}")
    if Delta <= 0.0:
        raise ValueError(f"domain violation: Delta must be > 0, got {Delta}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"domain violation: beta must be in (0, 1], got {beta}")
    return min(1.0, 2.0 * math.exp(-2.0 * L * Delta * Delta / (beta * beta)))


def recommended_table_terms(
    N: int, m_q: int, m: int, delta: float, Delta: float, gamma_max: float, beta: float
) -> tuple[float, float]:
    """The two competing lower bounds on L (upper-tail term, lower-tail term)."""
    if min(N, m_q, m) < 1:
        raise ValueError("domain violation: N, m_q, m must all be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"domain violation: delta must be in (0, 1), got {delta}")
    if not 0.0 < gamma_max < 1.0:
        raise ValueError(f"domain violation: gamma_max must be in (0, 1), got {gamma_max}")
    if Delta <= 0.0:
        raise ValueError(f"domain violation: Delta must be > 0, got {Delta}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"domain violation: beta must be in (0, 1], got {beta}")
    upper = math.log(2.0 * (N - 1) * m_q * m / delta) / math.log(1.0 / gamma_max) if N > 1 else 0.0
    lower = math.log(4.0 * m_q / delta) * beta * beta / (2.0 * Delta * Delta)
    return upper, lower


def recommended_tables(
    N: int, m_q: int, m: int, delta: float, Delta: float, gamma_max: float, beta: float
) -> int:
    """Smallest integer table count meeting both tail-bound terms."""
    upper, lower = recommended_table_terms(N, m_q, m, delta, Delta, gamma_max, beta)
    return max(1, math.ceil(max(upper, lower)))


def query_cost_estimate(
    m_q: int,
    N: int,
    m: int,
    d: int,
    delta: float,
    T: int,
    *,
    L: int | None = None,
    Delta: float | None = None,
    gamma_max: float | None = None,
    beta: float = 1.0,
) -> int:
    """Operation-count model m_q*L*d + m_q*N*L*T (hashing plus bucket scans).

    L may be given directly; otherwise it is derived via recommended_tables,
    which then requires Delta and gamma_max. T bounds bucket occupancy and may
    be 0 (all probed buckets empty), reducing the cost to the hashing term.
    """
    if min(m_q, N, m, d) < 1:
        raise ValueError("domain violation: m_q, N, m, d must all be >= 1")
    if T < 0:
        raise ValueError(f"domain violation: T must be >= 0, got {T}")
    if L is None:
        if Delta is None or gamma_max is None:
            raise ValueError("domain violation: provide L, or Delta and gamma_max to derive it")
        L = recommended_tables(N, m_q, m, delta, Delta, gamma_max, beta)
    elif L < 1:
        raise ValueError(f"domain violation: L must be >= 1, got {L}")
    return m_q * L * d + m_q * N * L * T


def max_gamma_over_similarity(Delta: float, alpha: float = 1.0, points: int = 1000) -> float:
    """Grid-search sup of gamma(s, alpha*s + Delta, alpha) over feasible s.

    The exact maximizer has no closed form; the feasible band is
    s in (0, 1 - Delta/alpha) where tau = alpha*s + Delta stays below alpha.
    """
    if Delta <= 0.0:
        raise ValueError(f"domain violation: Delta must be > 0, got {Delta}")
    if alpha < 1.0:
        raise ValueError(f"domain violation: alpha must be >= 1, got {alpha}")
    hi = 1.0 - Delta / alpha
    if hi <= 0.0:
        raise ValueError(f"domain violation: Delta must be < alpha, got {Delta}")
    eps = hi / (points + 1)
    best = 0.0
    for s in np.linspace(eps, hi - eps, points):
        best = max(best, gamma_upper(float(s), alpha * float(s) + Delta, alpha))
    return best
