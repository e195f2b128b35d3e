"""Bit-exact file formats: vector set collections, indexes, qrels.

Both binary formats are self-describing (magic + version) and little-endian
regardless of host. Index files store the hash family's seed rather than its
hyperplanes; planes are regenerated on load, which keeps files small and ties
every index to its reproducible family.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .index import DessertIndex, FilterConfig, IndexConfig
from .lsh import build_sim_lookup, sample_srp_family
from .prefilter import CentroidIndex, Centroids
from .scoring import PHI_KINDS
from .sketch import tiny_table_from_bytes, tiny_table_to_bytes

VECTOR_SET_MAGIC = b"DSRT"
INDEX_MAGIC = b"DSRI"
FORMAT_VERSION = 1


class StorageError(Exception):
    """Base class for file format failures."""


class BadMagicError(StorageError):
    pass


class VersionMismatchError(StorageError):
    pass


class TruncatedFileError(StorageError):
    pass


class CorruptSketchError(StorageError):
    pass


class QrelsParseError(StorageError):
    pass


class _Reader:
    """Cursor over a byte buffer that raises TruncatedFileError on short reads."""

    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"{self.path}: truncated (needed {n} more bytes)")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def floats(self, n: int) -> np.ndarray:
        raw = self.take(4 * n)
        return np.frombuffer(raw, dtype="<f4", count=n).astype(np.float32)


def write_vector_sets(path, docs) -> None:
    """Write (doc_id, vector set) pairs; float payload is stored as float32."""
    docs = list(docs)
    if not docs:
        raise ValueError("empty collection: nothing to write")
    d = np.asarray(docs[0][1]).shape[1]
    parts = [VECTOR_SET_MAGIC, struct.pack("<IQI", FORMAT_VERSION, len(docs), d)]
    for doc_id, S in docs:
        X = np.ascontiguousarray(S, dtype=np.float32)
        if X.ndim != 2 or X.shape[1] != d:
            raise ValueError(f"dimension mismatch: document {doc_id} has shape {X.shape}")
        if X.shape[0] < 1:
            raise ValueError(f"empty set: document {doc_id} has no vectors")
        parts.append(struct.pack("<QI", int(doc_id), X.shape[0]))
        parts.append(X.astype("<f4", copy=False).tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_vector_sets(path) -> list[tuple[int, np.ndarray]]:
    """Read a vector set file back; floats round-trip bit-exactly."""
    r = _Reader(Path(path).read_bytes(), path)
    magic = r.take(4)
    if magic != VECTOR_SET_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {VECTOR_SET_MAGIC!r}")
    (version, n, d) = r.unpack("IQI")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    docs = []
    for _ in range(n):
        doc_id, m = r.unpack("QI")
        if m < 1:
            raise TruncatedFileError(f"{path}: set {doc_id} declares zero vectors")
        docs.append((doc_id, r.floats(m * d).reshape(m, d)))
    return docs


def _encode_varint(x: int) -> bytes:
    out = bytearray()
    while x >= 0x80:
        out.append((x & 0x7F) | 0x80)
        x >>= 7
    out.append(x)
    return bytes(out)


def _decode_varint(r: _Reader) -> int:
    shift = 0
    value = 0
    while True:
        (b,) = r.take(1)
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value
        shift += 7


def save_index(path, index: DessertIndex) -> None:
    """Serialize an index. Deterministic: equal indexes produce equal bytes."""
    cfg = index.config
    phi_code = 0 if cfg.phi is None else PHI_KINDS.index(cfg.phi) + 1
    parts = [
        INDEX_MAGIC,
        struct.pack(
            "<IIIIQBBBBIIII",
            FORMAT_VERSION,
            cfg.d,
            cfg.C,
            cfg.L,
            cfg.seed,
            0 if cfg.inner_kind == "max" else 1,
            phi_code,
            1 if cfg.filter.enabled else 0,
            0,
            cfg.filter.centroids,
            cfg.filter.iters,
            cfg.filter.probe,
            cfg.filter.k_filter,
        ),
        struct.pack("<Q", index.n_docs),
    ]
    for doc_id, sketch in zip(index.doc_ids, index.sketches):
        parts.append(struct.pack("<Q", int(doc_id)))
        parts.append(tiny_table_to_bytes(sketch))
    if index.filter is not None:
        centroids, cindex = index.filter
        parts.append(struct.pack("<IIQ", centroids.k, cfg.d, cindex.n_docs))
        # Centroids keep full precision so probe selection survives a round trip.
        parts.append(np.ascontiguousarray(centroids.vectors, dtype="<f8").tobytes())
        for posting in cindex.postings:
            parts.append(_encode_varint(len(posting)))
            prev = 0
            for doc in posting:
                parts.append(_encode_varint(int(doc) - prev))
                prev = int(doc)
    Path(path).write_bytes(b"".join(parts))


def load_index(path) -> DessertIndex:
    """Load an index; the hash family and lookup are regenerated from the config."""
    r = _Reader(Path(path).read_bytes(), path)
    magic = r.take(4)
    if magic != INDEX_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {INDEX_MAGIC!r}")
    (
        version,
        d,
        C,
        L,
        seed,
        inner_code,
        phi_code,
        filter_enabled,
        _pad,
        f_centroids,
        f_iters,
        f_probe,
        f_kfilter,
    ) = r.unpack("IIIIQBBBBIIII")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    config = IndexConfig(
        d=d,
        C=C,
        L=L,
        seed=seed,
        inner_kind="max" if inner_code == 0 else "avg-phi",
        phi=None if phi_code == 0 else PHI_KINDS[phi_code - 1],
        filter=FilterConfig(
            enabled=bool(filter_enabled),
            centroids=f_centroids,
            iters=f_iters,
            probe=f_probe,
            k_filter=f_kfilter,
        ),
    )

    (n_docs,) = r.unpack("Q")
    if n_docs < 1:
        raise TruncatedFileError(f"{path}: index declares zero sets")
    doc_ids = np.zeros(n_docs, dtype=np.uint64)
    sketches = []
    for i in range(n_docs):
        (doc_id,) = r.unpack("Q")
        doc_ids[i] = doc_id
        try:
            sketch, r.pos = tiny_table_from_bytes(r.buf, r.pos)
        except ValueError as e:
            if "truncated" in str(e):
                raise TruncatedFileError(f"{path}: {e}") from e
            raise CorruptSketchError(f"{path}: set {doc_id}: {e}") from e
        if sketch.L != L or sketch.r != (1 << C):
            raise CorruptSketchError(
                f"{path}: set {doc_id}: sketch shape (L={sketch.L}, r={sketch.r}) "
                f"does not match config (L={L}, r={1 << C})"
            )
        sketches.append(sketch)

    filt = None
    if filter_enabled:
        k, cd, fn_docs = r.unpack("IIQ")
        if cd != d or fn_docs != n_docs:
            raise CorruptSketchError(f"{path}: prefilter block inconsistent with index")
        raw = r.take(8 * k * d)
        vectors = np.frombuffer(raw, dtype="<f8", count=k * d).astype(np.float64).reshape(k, d)
        postings = []
        for _ in range(k):
            count = _decode_varint(r)
            ids = np.zeros(count, dtype=np.int64)
            prev = 0
            for j in range(count):
                prev += _decode_varint(r)
                ids[j] = prev
            postings.append(ids)
        filt = (
            Centroids(k=k, seed=seed, vectors=vectors),
            CentroidIndex(n_docs=n_docs, postings=postings),
        )

    return DessertIndex(
        config=config,
        family=sample_srp_family(d, C, L, seed),
        lookup=build_sim_lookup(C, L),
        sketches=sketches,
        doc_ids=doc_ids,
        sizes=np.array([s.m for s in sketches], dtype=np.int64),
        filter=filt,
    )


def read_qrels(path) -> dict[int, set[int]]:
    """Parse tab-separated "query_id<TAB>doc_id" lines into a relevance multimap."""
    qrels: dict[int, set[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise QrelsParseError(f"{path}:{lineno}: expected 'query_id<TAB>doc_id'")
            try:
                qid, doc = int(fields[0]), int(fields[1])
            except ValueError as e:
                raise QrelsParseError(f"{path}:{lineno}: non-integer id") from e
            qrels.setdefault(qid, set()).add(doc)
    return qrels
