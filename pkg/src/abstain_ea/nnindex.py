"""Exact nearest-neighbor search, CSLS re-ranking and the NN cache.

Queries are split into fixed-size blocks; ``workers`` only changes how the
blocks are scheduled, so results are identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

BLOCK = 256


def _blocks(n: int):
    return [(i, min(i + BLOCK, n)) for i in range(0, n, BLOCK)]


def _map_blocks(fn, n: int, workers: int):
    spans = _blocks(n)
    if workers <= 1 or len(spans) <= 1:
        return [fn(a, b) for a, b in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))


def _check_target(targets: np.ndarray) -> None:
    if targets.ndim != 2 or targets.shape[0] == 0:
        raise ValueError("empty target table")


def euclidean_distances(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Pairwise euclidean distances (via the expanded square, clipped at 0)."""
    q2 = np.einsum("ij,ij->i", queries, queries)[:, None]
    t2 = np.einsum("ij,ij->i", targets, targets)[None, :]
    d2 = q2 + t2 - 2.0 * (queries @ targets.T)
    return np.sqrt(np.maximum(d2, 0.0))


def cosine_similarity(queries: np.ndarray, targets: np.ndarray) -> np.ndarray:
    qn = np.linalg.norm(queries, axis=1)
    tn = np.linalg.norm(targets, axis=1)
    if np.any(qn == 0) or np.any(tn == 0):
        raise ValueError("cosine similarity undefined for zero vectors")
    return (queries / qn[:, None]) @ (targets / tn[:, None]).T


def _topk_rows(scores: np.ndarray, k: int, descending: bool) -> np.ndarray:
    # stable sort keeps the smaller index first among ties
    keyed = -scores if descending else scores
    return np.argsort(keyed, axis=1, kind="stable")[:, :k]


def knn(
    queries: np.ndarray,
    targets: np.ndarray,
    k: int,
    metric: str = "euclidean",
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact top-k neighbors of every query row.

    Returns ``(indices, scores)`` of shape ``(n_queries, k)``.  Euclidean
    results are ascending by distance, cosine results descending by
    similarity; ties go to the smaller target index.  Reported euclidean
    distances are recomputed directly as ``||q - t||``.
    """
    _check_target(targets)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64)
    if not 1 <= k <= targets.shape[0]:
        raise ValueError(f"k={k} outside [1, {targets.shape[0]}]")
    if metric not in ("euclidean", "cosine"):
        raise ValueError(f"unknown metric {metric!r}")

    def run(a, b):
        q = queries[a:b]
        if metric == "euclidean":
            idx = _topk_rows(euclidean_distances(q, targets), k, descending=False)
            diff = q[:, None, :] - targets[idx]
            return idx, np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        sim = cosine_similarity(q, targets)
        idx = _topk_rows(sim, k, descending=True)
        return idx, np.take_along_axis(sim, idx, axis=1)

    parts = _map_blocks(run, queries.shape[0], workers)
    if not parts:
        return np.zeros((0, k), dtype=np.int64), np.zeros((0, k))
    return (
        np.concatenate([p[0] for p in parts]).astype(np.int64),
        np.concatenate([p[1] for p in parts]),
    )


def nearest(
    queries: np.ndarray, targets: np.ndarray, workers: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean 1-NN: ``(index, distance)`` per query."""
    idx, dist = knn(queries, targets, 1, "euclidean", workers)
    return idx[:, 0], dist[:, 0]


def csls_matrix(sources: np.ndarray, targets: np.ndarray, k_csls: int = 10) -> np.ndarray:
    """Full CSLS matrix ``2 cos(x, y) - r_T(x) - r_S(y)``.

    ``r_T(x)`` is the mean cosine of source ``x`` to its ``k_csls`` most
    similar targets, ``r_S(y)`` the mean cosine of target ``y`` to its
    ``k_csls`` most similar sources (both over the given tables; ``k_csls``
    is clipped to the table size).
    """
    _check_target(targets)
    if k_csls < 1:
        raise ValueError("k_csls must be >= 1")
    sim = cosine_similarity(np.atleast_2d(sources), targets)
    kt = min(k_csls, sim.shape[1])
    ks = min(k_csls, sim.shape[0])
    # partition is order-independent for the mean of the top-k values
    r_t = -np.partition(-sim, kt - 1, axis=1)[:, :kt].mean(axis=1)
    r_s = -np.partition(-sim, ks - 1, axis=0)[:ks, :].mean(axis=0)
    return 2.0 * sim - r_t[:, None] - r_s[None, :]


def csls_rank(
    sources: np.ndarray,
    targets: np.ndarray,
    k_csls: int = 10,
    top: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Targets ranked by CSLS per source: ``(indices, scores)``, descending."""
    scores = csls_matrix(sources, targets, k_csls)
    top = scores.shape[1] if top is None else min(top, scores.shape[1])
    idx = _topk_rows(scores, top, descending=True)
    return idx, np.take_along_axis(scores, idx, axis=1)


def gold_ranks(scores: np.ndarray, gold: np.ndarray, candidates: np.ndarray | None = None) -> np.ndarray:
    """1-based rank of ``gold[i]`` in row ``i`` of a similarity matrix.

    Ties with a smaller index rank ahead, matching :func:`knn`.  With a
    boolean ``candidates`` mask, masked-out columns are ignored (the gold
    target is always treated as a candidate).
    """
    rows = np.arange(scores.shape[0])
    g = scores[rows, gold][:, None]
    cols = np.arange(scores.shape[1])[None, :]
    ahead = (scores > g) | ((scores == g) & (cols < gold[:, None]))
    if candidates is not None:
        ahead &= candidates[None, :]
    return ahead.sum(axis=1) + 1


@dataclass(frozen=True)
class NnCache:
    """Snapshot of transformed nearest neighbors for a fixed set of sources."""

    sources: np.ndarray  # source entity ids
    nn: np.ndarray  # nearest target id per source
    dist: np.ndarray  # euclidean distance of M x to that target
    epoch: int
    period: int = 10

    def lookup(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pos = np.searchsorted(self.sources, ids)
        if np.any(pos >= len(self.sources)) or np.any(self.sources[pos] != ids):
            raise KeyError("entity not in NN cache")
        return self.nn[pos], self.dist[pos]


def refresh_cache(
    source_vectors: np.ndarray,
    target_vectors: np.ndarray,
    sources: np.ndarray,
    epoch: int,
    cache: NnCache | None = None,
    period: int = 10,
    workers: int = 1,
) -> NnCache:
    """Return a fresh cache on refresh epochs (or when empty), else ``cache``.

    ``source_vectors`` must already be in the target space (``M x``).  A new
    immutable snapshot is built and returned; the old one is never mutated.
    """
    if cache is not None and len(cache.sources) and epoch % period != 0:
        return cache
    ids = np.unique(np.asarray(sources, dtype=np.int64))
    nn, dist = nearest(source_vectors[ids], target_vectors, workers)
    return NnCache(sources=ids, nn=nn, dist=dist, epoch=epoch, period=period)
