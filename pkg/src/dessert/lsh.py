"""Signed random projection (SRP) hashing.

Each of the L tables uses C concatenated sign bits: bit c of a table's code
is 1 iff the vector has positive projection onto hyperplane c of that table.
Two vectors collide in one table with probability (1 - theta/pi)^C, where
theta is the angle between them, so collision counts over the L tables
carry an estimate of angular similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Codes must index a 2^C-wide offsets row and fit comfortably in a machine word.
MAX_CONCAT_BITS = 24


@dataclass(frozen=True)
class SrpFamily:
    """L tables of C concatenated sign-bit hashes over seeded random hyperplanes.

    ``planes`` has shape (L*C, d); row t*C + c is hyperplane c of table t.
    Rebuilding with the same (d, C, L, seed) yields bit-identical planes.
    Immutable after construction; safe for concurrent reads.
    """

    d: int
    C: int
    L: int
    seed: int
    planes: np.ndarray

    @property
    def code_range(self) -> int:
        """Number of possible codes per table, r = 2^C."""
        return 1 << self.C


@dataclass(frozen=True)
class SimLookup:
    """Precomputed map from collision count k (out of L) to similarity.

    table[k] = (k/L)^(1/C) for k >= 1; table[0] = 0 by convention (a set
    element that never collides is treated as having zero similarity).
    """

    C: int
    L: int
    table: np.ndarray


def sample_srp_family(d: int, C: int, L: int, seed: int) -> SrpFamily:
    """Draw an SRP family with L*C i.i.d. standard normal hyperplanes."""
    if d < 1:
        raise ValueError(f"invalid parameter: d must be >= 1, got {d}")
    if C < 1 or C > MAX_CONCAT_BITS:
        raise ValueError(
            f"invalid parameter: C must be in [1, {MAX_CONCAT_BITS}], got {C}"
        )
    if L < 1:
        raise ValueError(f"invalid parameter: L must be >= 1, got {L}")
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((L * C, d))
    return SrpFamily(d=d, C=C, L=L, seed=seed, planes=planes)


def _check_vector(family: SrpFamily, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (family.d,):
        raise ValueError(
            f"dimension mismatch: expected vector of dim {family.d}, got shape {v.shape}"
        )
    if not np.any(v):
        raise ValueError("zero vector cannot be hashed (sign of zero projection undefined)")
    return v


def hash_vector(family: SrpFamily, v: np.ndarray) -> np.ndarray:
    """Hash one vector into L codes, each in [0, 2^C).

    Bit c of table t's code is 1 iff <planes[t*C + c], v> > 0, so codes are
    invariant under positive rescaling of v.
    """
    v = _check_vector(family, v)
    return hash_matrix(family, v[None, :])[0]


def hash_matrix(family: SrpFamily, X: np.ndarray) -> np.ndarray:
    """Hash the rows of an (n, d) matrix; returns (n, L) codes.

    Row i equals hash_vector(family, X[i]); the batch path exists so builds
    and queries hash whole sets in one projection.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != family.d:
        raise ValueError(
            f"dimension mismatch: expected (n, {family.d}) matrix, got shape {X.shape}"
        )
    if not np.all(np.any(X, axis=1)):
        raise ValueError("zero vector cannot be hashed (sign of zero projection undefined)")
    bits = (X @ family.planes.T) > 0.0
    bits = bits.reshape(X.shape[0], family.L, family.C)
    weights = np.left_shift(1, np.arange(family.C, dtype=np.int64))
    return bits @ weights


def srp_collision_probability(x: np.ndarray, y: np.ndarray, C: int) -> float:
    """Exact probability that one C-bit concatenated SRP code of x equals y's.

    Equals (1 - theta/pi)^C with theta the angle between x and y; this is the
    analytic target the collision-count estimator converges to.
    """
    if C < 1:
        raise ValueError(f"invalid parameter: C must be >= 1, got {C}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: got shapes {x.shape} and {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("zero vector has no collision probability")
    cos = np.clip(np.dot(x, y) / (nx * ny), -1.0, 1.0)
    theta = np.arccos(cos)
    return float((1.0 - theta / np.pi) ** C)


def build_sim_lookup(C: int, L: int) -> SimLookup:
    """Build the count -> similarity table: table[k] = (k/L)^(1/C), table[0] = 0."""
    if C < 1:
        raise ValueError(f"invalid parameter: C must be >= 1, got {C}")
    if L < 1:
        raise ValueError(f"invalid parameter: L must be >= 1, got {L}")
    k = np.arange(L + 1, dtype=np.float64)
    table = (k / L) ** (1.0 / C)
    table[0] = 0.0
    return SimLookup(C=C, L=L, table=table)
