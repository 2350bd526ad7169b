"""Exact batched similarity search over node embeddings.

Search is brute-force and deterministic: results are the true top-k under the
chosen metric with ties broken by ascending node id. Batched queries reuse the
same per-row score kernel as single queries, so batch and sequential results
are bit-identical (BLAS matrix-matrix products are not).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = ["EmbeddingIndex", "RetrievalHit", "build_index", "knn_query", "batch_knn"]


@dataclass(frozen=True)
class RetrievalHit:
    node: int
    score: float


@dataclass(frozen=True)
class EmbeddingIndex:
    """Dense row-major embedding matrix with cached Euclidean norms."""

    matrix: np.ndarray
    norms: np.ndarray
    metric: str  # "cosine" | "dot"

    def __post_init__(self):
        self.matrix.setflags(write=False)
        self.norms.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def zero_rows(self) -> np.ndarray:
        """Ids of zero-norm rows; cosine against them scores 0."""
        return np.flatnonzero(self.norms == 0.0)


def build_index(embeddings: np.ndarray, metric: str = "cosine") -> EmbeddingIndex:
    """Build an immutable exact-search index over an (n, d) matrix."""
    if metric not in ("cosine", "dot"):
        raise ValueError(f"unknown metric {metric!r}")
    mat = np.ascontiguousarray(np.asarray(embeddings, dtype=np.float64))
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError(f"embeddings must be a nonempty 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("embeddings contain non-finite entries")
    norms = np.sqrt(np.einsum("ij,ij->i", mat, mat))
    return EmbeddingIndex(matrix=mat, norms=norms, metric=metric)


def _scores(index: EmbeddingIndex, query: np.ndarray) -> np.ndarray:
    """Similarity of every row against one query vector.

    This is the single canonical kernel for both single and batched search;
    cosine with a zero-norm operand is defined as 0.
    """
    dots = index.matrix @ query
    if index.metric == "dot":
        return dots
    qn = float(np.sqrt(query @ query))
    if qn == 0.0:
        return np.zeros(index.size, dtype=np.float64)
    safe = np.where(index.norms == 0.0, 1.0, index.norms)
    out = dots / (safe * qn)
    out[index.norms == 0.0] = 0.0
    return out


def _check_query(index: EmbeddingIndex, query: np.ndarray) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ValueError(f"query has shape {q.shape}, index dimension is {index.dim}")
    if not np.all(np.isfinite(q)):
        raise ValueError("query contains non-finite entries")
    return q


def knn_query(
    index: EmbeddingIndex,
    query: np.ndarray,
    k: int,
    exclude: Optional[Iterable[int]] = None,
) -> list:
    """Exact top-k hits for one query, ties broken by ascending node id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _check_query(index, query)
    scores = _scores(index, q)
    n_excluded = 0
    if exclude:
        excl = np.fromiter((int(e) for e in exclude), dtype=np.int64)
        excl = excl[(excl >= 0) & (excl < index.size)]
        excl = np.unique(excl)
        n_excluded = excl.size
        scores = scores.copy()
        scores[excl] = -np.inf
    take = min(k, index.size - n_excluded)
    if take <= 0:
        return []
    order = np.lexsort((np.arange(index.size), -scores))[:take]
    return [RetrievalHit(node=int(i), score=float(scores[i])) for i in order]


def batch_knn(
    index: EmbeddingIndex,
    queries: np.ndarray,
    k: int,
    excludes: Optional[Sequence[Optional[Iterable[int]]]] = None,
    workers: int = 1,
) -> list:
    """Row-wise exact search; result i is identical to ``knn_query(queries[i])``.

    One validation pass covers the whole batch; rows may be searched in
    parallel but results always come back in input order.
    """
    qmat = np.asarray(queries, dtype=np.float64)
    if qmat.ndim != 2:
        if qmat.ndim == 1 and qmat.size == 0:
            return []
        raise ValueError(f"queries must be 2-D, got shape {qmat.shape}")
    if qmat.shape[0] == 0:
        return []
    if qmat.shape[1] != index.dim:
        raise ValueError(f"queries have dimension {qmat.shape[1]}, index dimension is {index.dim}")
    if not np.all(np.isfinite(qmat)):
        raise ValueError("queries contain non-finite entries")
    if excludes is not None and len(excludes) != qmat.shape[0]:
        raise ValueError("excludes must align with queries")

    def one(i: int):
        excl = excludes[i] if excludes is not None else None
        return knn_query(index, qmat[i], k, exclude=excl)

    m = qmat.shape[0]
    if workers <= 1 or m == 1:
        return [one(i) for i in range(m)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(m)))
