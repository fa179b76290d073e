"""Inverted-file index with optional product quantization of residuals.

All vectors are unit-normalized on the way in, so inner products are
cosine similarities.
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import ConfigError, InputError
from .kmeans import kmeans, sq_distances

MAGIC = b"SFGIVFPQ"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIIBIIQ")  # magic, version, d, nPartitions, pq flag, m, k, count


@dataclass
class PqConfig:
    enabled: bool = True
    m: int = 8
    k: int = 256


def default_partitions(n: int) -> int:
    return max(1, math.isqrt(n))


def unit(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=-1, keepdims=True)
    return X / np.where(norms > 0, norms, 1.0)


def row_dots(rows: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Inner product of each row with q, computed row by row (independent of batch shape)."""
    return (rows * q).sum(axis=1)


@dataclass
class IvfPqIndex:
    d: int
    centroids: np.ndarray
    assign: np.ndarray  # partition of each stored vector
    ids: list
    pq: PqConfig
    vectors: Optional[np.ndarray] = None  # inputs as given (PQ off)
    codes: Optional[np.ndarray] = None  # (n, m) uint8/uint16 (PQ on)
    codebooks: Optional[np.ndarray] = None  # (m, k, d/m)
    lists: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.lists = [np.flatnonzero(self.assign == p) for p in range(len(self.centroids))]
        self._unit = unit(self.vectors) if self.vectors is not None else None

    def __len__(self):
        return len(self.ids)

    @property
    def n_partitions(self):
        return len(self.centroids)

    def reconstruct(self, i: int) -> np.ndarray:
        """The stored vector: the input itself without PQ, else centroid + decoded residual."""
        if self.vectors is not None:
            return self.vectors[i]
        return self._decode(np.array([i]))[0]

    def _decode(self, rows: np.ndarray) -> np.ndarray:
        m = self.pq.m
        parts = [self.codebooks[s][self.codes[rows, s]] for s in range(m)]
        return self.centroids[self.assign[rows]] + np.concatenate(parts, axis=1)

    def approx_unit(self, rows: np.ndarray) -> np.ndarray:
        if self._unit is not None:
            return self._unit[rows]
        return self._decode(rows)


def build_index(vectors, ids: Optional[Sequence] = None, n_partitions: Optional[int] = None,
                pq: Optional[PqConfig] = None, seed: int = 0) -> IvfPqIndex:
    """Partition unit-normalized vectors with k-means; optionally product-quantize residuals."""
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise InputError("build_index needs a non-empty (n, d) array")
    n, d = X.shape
    pq = pq or PqConfig(enabled=False)
    ids = list(range(n)) if ids is None else list(ids)
    if len(ids) != n:
        raise InputError(f"{len(ids)} ids for {n} vectors")
    P = default_partitions(n) if n_partitions is None else n_partitions
    if not 1 <= P <= n:
        raise ConfigError(f"nPartitions={P} needs 1 <= nPartitions <= {n} vectors")
    if pq.enabled and d % pq.m:
        raise ConfigError(f"dimension {d} is not divisible by m={pq.m} subspaces")
    U = unit(X)
    km = kmeans(U, P, seed=seed)
    if not pq.enabled:
        return IvfPqIndex(d, km.centroids, km.labels, ids, pq, vectors=X.copy())
    R = U - km.centroids[km.labels]
    sub = d // pq.m
    k = min(pq.k, n)
    books = np.zeros((pq.m, k, sub))
    codes = np.zeros((n, pq.m), dtype=np.uint16 if k > 256 else np.uint8)
    for s in range(pq.m):
        part = R[:, s * sub:(s + 1) * sub]
        res = kmeans(part, k, seed=seed + 1 + s)
        books[s], codes[:, s] = res.centroids, res.labels
    return IvfPqIndex(d, km.centroids, km.labels, ids, PqConfig(True, pq.m, k), codes=codes, codebooks=books)


def _rank(positions: np.ndarray, scores: np.ndarray, n: int):
    order = np.lexsort((positions, -scores))[:n]
    return positions[order], scores[order]


def search(index: IvfPqIndex, query, nprobe: int = 4, n_prime: int = 100):
    """Top-N' (id, score) pairs from the nprobe partitions nearest the query.

    Ties in score are broken by insertion order.
    """
    if n_prime <= 0 or len(index) == 0:
        return []
    q = unit(query)
    probe = min(max(1, nprobe), index.n_partitions)
    cd = sq_distances(q[None], index.centroids)[0]
    parts = np.lexsort((np.arange(len(cd)), cd))[:probe]
    rows = np.sort(np.concatenate([index.lists[p] for p in parts]))
    if len(rows) == 0:
        return []
    pos, sc = _rank(rows, row_dots(index.approx_unit(rows), q), n_prime)
    return [(index.ids[i], float(s)) for i, s in zip(pos, sc)]


def exhaustive_search(index: IvfPqIndex, query, n_prime: int = 100):
    """Brute-force scan over every stored vector, same scoring and tie policy as search."""
    if n_prime <= 0 or len(index) == 0:
        return []
    q = unit(query)
    rows = np.arange(len(index))
    pos, sc = _rank(rows, row_dots(index.approx_unit(rows), q), n_prime)
    return [(index.ids[i], float(s)) for i, s in zip(pos, sc)]


def rerank(candidates, query=None, exact: Union[dict, Callable, None] = None):
    """Stable descending re-sort of candidates by exact scores.

    ``exact`` maps id -> score (dict or callable). Equal scores keep the
    incoming candidate order.
    """
    if exact is None:
        return list(candidates)
    get = exact.get if isinstance(exact, dict) else exact
    scored = [(cid, float(get(cid))) for cid, _ in candidates]
    return sorted(scored, key=lambda t: -t[1])


def exact_scorer(vectors_by_id: dict, query) -> Callable:
    """Cosine between the query and un-quantized vectors looked up by id."""
    q = unit(query)

    def score(cid):
        return float(unit(vectors_by_id[cid]) @ q)

    return score


# -- persistence -----------------------------------------------------------

def _write_array(fh, a):
    buf = io.BytesIO()
    np.save(buf, a, allow_pickle=False)
    data = buf.getvalue()
    fh.write(struct.pack("<Q", len(data)))
    fh.write(data)


def _read_array(fh):
    (n,) = struct.unpack("<Q", fh.read(8))
    return np.load(io.BytesIO(fh.read(n)), allow_pickle=False)


def save_index(index: IvfPqIndex, path):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, index.d, index.n_partitions, int(index.pq.enabled),
                              index.pq.m, index.pq.k, len(index)))
        ids = json.dumps(index.ids).encode()
        fh.write(struct.pack("<Q", len(ids)))
        fh.write(ids)
        _write_array(fh, index.centroids)
        _write_array(fh, index.assign.astype(np.int64))
        if index.pq.enabled:
            _write_array(fh, index.codes)
            _write_array(fh, index.codebooks)
        else:
            _write_array(fh, index.vectors)


def load_index(path) -> IvfPqIndex:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise InputError(f"{path}: truncated index header")
        magic, version, d, P, flag, m, k, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InputError(f"{path}: not an index file")
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: index format version {version}, expected {FORMAT_VERSION}")
        (n,) = struct.unpack("<Q", fh.read(8))
        ids = json.loads(fh.read(n).decode())
        centroids = _read_array(fh)
        assign = _read_array(fh)
        pq = PqConfig(bool(flag), m, k)
        if pq.enabled:
            codes, books = _read_array(fh), _read_array(fh)
            idx = IvfPqIndex(d, centroids, assign, ids, pq, codes=codes, codebooks=books)
        else:
            idx = IvfPqIndex(d, centroids, assign, ids, pq, vectors=_read_array(fh))
    if len(idx) != count or len(centroids) != P:
        raise InputError(f"{path}: header counts do not match the payload")
    return idx
