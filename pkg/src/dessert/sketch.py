"""TinyTable: a byte-packed static map from (table, hash value) to vector ids.

Each of the L tables is stored as an offsets row of r+1 entries plus a
permutation of the m vector ids, so bucket (t, h) is the slice
ids[t, offsets[t, h] : offsets[t, h+1]]. Entries are one byte wide when the
set is small enough, two bytes otherwise. Tables are immutable after build.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

# Serialized header: m u32, L u32, r u32, flags u32, reserved u64 (little-endian).
HEADER_BYTES = 24
_HEADER = struct.Struct("<IIIIQ")
_FLAG_WIDE_OFFSETS = 1
_FLAG_WIDE_IDS = 2

# Two-byte offsets top out at 65535, and offsets must reach m inclusive.
MAX_SET_SIZE = 65535


def _offset_dtype(m: int) -> np.dtype:
    # Offsets reach m inclusive, so one byte only covers m <= 255.
    return np.dtype(np.uint8) if m <= 255 else np.dtype(np.uint16)


def _id_dtype(m: int) -> np.dtype:
    # Ids reach m - 1, so one byte covers m <= 256.
    return np.dtype(np.uint8) if m <= 256 else np.dtype(np.uint16)


@dataclass(frozen=True)
class TinyTable:
    """Static per-set sketch: L inverted indices over hash range r.

    offsets: (L, r+1) with offsets[t, 0] = 0, offsets[t, r] = m, non-decreasing.
    ids: (L, m), each row a permutation of 0..m-1, ascending within a bucket.
    """

    m: int
    L: int
    r: int
    offsets: np.ndarray
    ids: np.ndarray


def build_tiny_table(codes_per_vector: np.ndarray, L: int, r: int) -> TinyTable:
    """Build a TinyTable from the (m, L) hash codes of one vector set.

    Bucket (t, h) receives exactly the ids j with codes_per_vector[j, t] == h,
    in ascending j, via a stable sort per table (deterministic layout).
    """
    codes = np.asarray(codes_per_vector)
    if codes.ndim != 2:
        raise ValueError(f"expected (m, L) code matrix, got shape {codes.shape}")
    m = codes.shape[0]
    if m == 0:
        raise ValueError("empty set: cannot sketch zero vectors")
    if m > MAX_SET_SIZE:
        raise ValueError(f"set too large: m must be <= {MAX_SET_SIZE}, got {m}")
    if codes.shape[1] != L:
        raise ValueError(f"expected {L} codes per vector, got {codes.shape[1]}")
    if r < 1:
        raise ValueError(f"invalid parameter: r must be >= 1, got {r}")
    if codes.min() < 0 or codes.max() >= r:
        raise ValueError(f"code out of range: codes must lie in [0, {r})")

    offsets = np.zeros((L, r + 1), dtype=_offset_dtype(m))
    ids = np.zeros((L, m), dtype=_id_dtype(m))
    for t in range(L):
        col = codes[:, t]
        counts = np.bincount(col, minlength=r)
        offsets[t, 1:] = np.cumsum(counts)
        # Stable argsort on integer keys == counting sort: ascending j per bucket.
        ids[t] = np.argsort(col, kind="stable")
    return TinyTable(m=m, L=L, r=r, offsets=offsets, ids=ids)


def bucket(table: TinyTable, t: int, h: int) -> np.ndarray:
    """Return the vector ids stored in bucket (t, h) as a zero-copy view."""
    if not 0 <= t < table.L:
        raise IndexError(f"table index out of range: t={t}, L={table.L}")
    if not 0 <= h < table.r:
        raise IndexError(f"hash value out of range: h={h}, r={table.r}")
    return table.ids[t, int(table.offsets[t, h]) : int(table.offsets[t, h + 1])]


def accumulate_collisions(
    table: TinyTable, query_codes: np.ndarray, out: np.ndarray | None = None
) -> np.ndarray:
    """Count, per stored vector, the tables in which it collides with the query.

    query_codes is one vector's L codes. counts[j] = |{t : stored code of j in
    table t == query_codes[t]}| <= L. ``out`` may supply a reusable buffer of
    length >= m (only the first m entries are written).
    """
    codes = np.asarray(query_codes)
    if codes.shape != (table.L,):
        raise ValueError(f"expected {table.L} query codes, got shape {codes.shape}")
    if codes.min() < 0 or codes.max() >= table.r:
        raise ValueError(f"code out of range: codes must lie in [0, {table.r})")
    if out is None:
        counts = np.zeros(table.m, dtype=np.int32)
    else:
        counts = out[: table.m]
        counts[:] = 0
    for t in range(table.L):
        lo = int(table.offsets[t, codes[t]])
        hi = int(table.offsets[t, codes[t] + 1])
        counts[table.ids[t, lo:hi]] += 1
    return counts


def accumulate_collisions_batch(
    table: TinyTable, query_codes: np.ndarray, out: np.ndarray | None = None
) -> np.ndarray:
    """Vectorized accumulate_collisions for a whole (m_q, L) code matrix.

    Row q of the result equals accumulate_collisions(table, query_codes[q]).
    One ragged gather covers all (q, t) buckets, so the per-candidate cost in
    the query loop stays a handful of array ops. ``out`` may supply a reusable
    (>= m_q, >= m) buffer; the used slice is zeroed and returned.
    """
    codes = np.asarray(query_codes)
    if codes.ndim != 2 or codes.shape[1] != table.L:
        raise ValueError(f"expected (m_q, {table.L}) code matrix, got shape {codes.shape}")
    if codes.min() < 0 or codes.max() >= table.r:
        raise ValueError(f"code out of range: codes must lie in [0, {table.r})")
    m_q = codes.shape[0]
    if out is None:
        counts = np.zeros((m_q, table.m), dtype=np.int32)
    else:
        counts = out[:m_q, : table.m]
        counts[:] = 0

    t_idx = np.arange(table.L)
    starts = table.offsets[t_idx, codes].astype(np.intp)
    lens = (table.offsets[t_idx, codes + 1] - starts).reshape(-1).astype(np.intp)
    total = int(lens.sum())
    if total == 0:
        return counts
    # Flattened ids: bucket (t, h) lives at t*m + offsets[t, h] in ids.ravel().
    flat_starts = (starts + t_idx * table.m).reshape(-1)
    ends_cum = np.cumsum(lens)
    pos = np.arange(total, dtype=np.intp) - np.repeat(ends_cum - lens, lens)
    members = table.ids.reshape(-1)[pos + np.repeat(flat_starts, lens)]
    q_rows = np.repeat(np.repeat(np.arange(m_q), table.L), lens)
    np.add.at(counts, (q_rows, members), 1)
    return counts


def collision_keys(table: TinyTable, query_codes: np.ndarray) -> np.ndarray:
    """One int64 key q*m + j per collision event (with multiplicity).

    The multiplicity of a key equals the collision count of query row q with
    stored vector j, so bincounting the keys reproduces
    accumulate_collisions_batch. Query engines sort this stream instead of
    scattering into a dense count matrix; codes are trusted (hashed in-process),
    not re-validated.
    """
    codes = np.asarray(query_codes)
    m_q = codes.shape[0]
    t_idx = np.arange(table.L)
    starts = table.offsets[t_idx, codes].astype(np.intp)
    lens = (table.offsets[t_idx, codes + 1] - starts).reshape(-1).astype(np.intp)
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    flat_starts = (starts + t_idx * table.m).reshape(-1)
    ends_cum = np.cumsum(lens)
    pos = np.arange(total, dtype=np.intp) - np.repeat(ends_cum - lens, lens)
    members = table.ids.reshape(-1)[pos + np.repeat(flat_starts, lens)]
    cell_keys = (np.arange(m_q * table.L, dtype=np.int64) // table.L) * table.m
    return np.repeat(cell_keys, lens) + members


def tiny_table_bytes(m: int, r: int, L: int) -> int:
    """Serialized size of one TinyTable: 24-byte header + offsets + ids.

    In the one-byte regime (m <= 255) this is 24 + L*(m + r + 1); wider sets
    pay two bytes per escalated entry kind.
    """
    return HEADER_BYTES + L * (
        _id_dtype(m).itemsize * m + _offset_dtype(m).itemsize * (r + 1)
    )


def tiny_table_to_bytes(table: TinyTable) -> bytes:
    """Serialize to the fixed little-endian layout: header, offsets, ids."""
    flags = 0
    if table.offsets.dtype.itemsize == 2:
        flags |= _FLAG_WIDE_OFFSETS
    if table.ids.dtype.itemsize == 2:
        flags |= _FLAG_WIDE_IDS
    header = _HEADER.pack(table.m, table.L, table.r, flags, 0)
    off = table.offsets.astype(table.offsets.dtype.newbyteorder("<"), copy=False)
    ids = table.ids.astype(table.ids.dtype.newbyteorder("<"), copy=False)
    return header + off.tobytes() + ids.tobytes()


def tiny_table_from_bytes(buf: bytes, pos: int = 0) -> tuple[TinyTable, int]:
    """Parse one TinyTable at ``pos``; returns (table, next position).

    Re-validates the structural invariants so corrupt bytes never produce a
    usable sketch. Raises ValueError on any violation and on short buffers.
    """
    if len(buf) - pos < HEADER_BYTES:
        raise ValueError("truncated sketch: missing header")
    m, L, r, flags, _reserved = _HEADER.unpack_from(buf, pos)
    pos += HEADER_BYTES
    if m < 1 or L < 1 or r < 1:
        raise ValueError(f"corrupt sketch: bad dimensions m={m}, L={L}, r={r}")
    off_dtype = np.dtype(np.uint16 if flags & _FLAG_WIDE_OFFSETS else np.uint8)
    id_dtype = np.dtype(np.uint16 if flags & _FLAG_WIDE_IDS else np.uint8)
    if off_dtype != _offset_dtype(m) or id_dtype != _id_dtype(m):
        raise ValueError(f"corrupt sketch: width flags {flags} inconsistent with m={m}")

    off_bytes = L * (r + 1) * off_dtype.itemsize
    id_bytes = L * m * id_dtype.itemsize
    if len(buf) - pos < off_bytes + id_bytes:
        raise ValueError("truncated sketch: missing payload")
    offsets = np.frombuffer(buf, dtype=off_dtype.newbyteorder("<"), count=L * (r + 1), offset=pos)
    offsets = offsets.astype(off_dtype).reshape(L, r + 1)
    pos += off_bytes
    ids = np.frombuffer(buf, dtype=id_dtype.newbyteorder("<"), count=L * m, offset=pos)
    ids = ids.astype(id_dtype).reshape(L, m)
    pos += id_bytes

    if np.any(offsets[:, 0] != 0) or np.any(offsets[:, -1] != m):
        raise ValueError("corrupt sketch: offsets do not span 0..m")
    if np.any(np.diff(offsets.astype(np.int64), axis=1) < 0):
        raise ValueError("corrupt sketch: offsets not monotone")
    if not np.array_equal(np.sort(ids, axis=1), np.broadcast_to(np.arange(m), (L, m))):
        raise ValueError("corrupt sketch: ids are not a permutation per table")
    return TinyTable(m=m, L=L, r=r, offsets=offsets, ids=ids), pos
