"""Alignment objectives: MTransE and the one-hop aggregation aligner.

All loss functions take gathered embedding rows and return ``(loss, grads)``
where ``grads`` maps each input name to its gradient.  Hinge and norm kinks
get a zero subgradient.

``AggAlign`` is a one-hop mean-aggregation encoder trained with a
margin-based alignment loss; it is a lightweight stand-in for AliNet, not a
reimplementation of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kg import KnowledgeGraph
from .nnindex import knn


@dataclass
class MTransEConfig:
    triple_margin: float = 1.0
    norm: str = "L2"
    align_weight: float = 1.0

    def __post_init__(self):
        if self.triple_margin <= 0:
            raise ValueError("triple_margin must be > 0")
        if self.align_weight <= 0:
            raise ValueError("align_weight must be > 0")
        if self.norm not in ("L1", "L2"):
            raise ValueError(f"norm must be L1 or L2, got {self.norm!r}")


@dataclass
class AggAlignConfig:
    margin: float = 1.4
    dim: int = 256
    activation: str = "tanh"

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")


def _norm(v: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.abs(v).sum(axis=-1)
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def _norm_grad(v: np.ndarray, norm: str) -> np.ndarray:
    if norm == "L1":
        return np.sign(v)
    n = np.sqrt(np.einsum("...i,...i->...", v, v))[..., None]
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def transe_score(h, r, t, norm: str = "L2"):
    """``||h + r - t||`` under the L1 or L2 norm (batched over leading axes)."""
    h, r, t = (np.asarray(a, dtype=np.float64) for a in (h, r, t))
    if not (h.shape[-1] == r.shape[-1] == t.shape[-1]):
        raise ValueError("dimension mismatch")
    return _norm(h + r - t, norm)


def mtranse_triple_loss(pos_h, pos_r, pos_t, neg_h, neg_r, neg_t, cfg: MTransEConfig):
    """Margin ranking over TransE scores, one row per (positive, negative) pair.

    ``sum max(0, margin + score(pos) - score(neg))``.
    """
    if len(pos_h) == 0:
        raise ValueError("empty batch")
    vp = pos_h + pos_r - pos_t
    vn = neg_h + neg_r - neg_t
    hinge = cfg.triple_margin + _norm(vp, cfg.norm) - _norm(vn, cfg.norm)
    active = (hinge > 0)[:, None]
    loss = float(np.maximum(hinge, 0.0).sum())
    gp = _norm_grad(vp, cfg.norm) * active
    gn = -_norm_grad(vn, cfg.norm) * active
    grads = {
        "pos_h": gp,
        "pos_r": gp,
        "pos_t": -gp,
        "neg_h": gn,
        "neg_r": gn,
        "neg_t": -gn,
    }
    return loss, grads


def mtranse_align_loss(x1, x2, transform, cfg: MTransEConfig):
    """``align_weight * sum ||M x1 - x2||`` with row vectors (``x1 @ M.T``)."""
    if len(x1) == 0:
        raise ValueError("empty batch")
    v = x1 @ transform.T - x2
    loss = cfg.align_weight * float(_norm(v, cfg.norm).sum())
    gv = cfg.align_weight * _norm_grad(v, cfg.norm)
    return loss, {"x1": gv @ transform, "x2": -gv, "transform": gv.T @ x1}


# ---------------------------------------------------------------------------
# one-hop aggregation encoder


def aggregation_matrix(kg: KnowledgeGraph) -> sp.csr_matrix:
    """Row-normalized neighbor-mean operator; isolated entities get a zero row."""
    rows, cols, vals = [], [], []
    for e, nbrs in enumerate(kg.neighbor_lists()):
        if nbrs:
            w = 1.0 / len(nbrs)
            rows += [e] * len(nbrs)
            cols += nbrs
            vals += [w] * len(nbrs)
    n = kg.num_entities
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _activate(pre, activation):
    return np.tanh(pre) if activation == "tanh" else pre


def encode(table, agg, ids, w_self, w_nbr, activation="tanh"):
    """Encode ``ids``: ``act(x W_self + mean_nbr(x) W_nbr)``.

    Returns ``(outputs, cache)``; the cache feeds :func:`encode_backward`.
    """
    ids = np.asarray(ids, dtype=np.int64)
    x = table[ids]
    m = np.asarray(agg[ids] @ table)
    pre = x @ w_self + m @ w_nbr
    out = _activate(pre, activation)
    return out, (ids, x, m, out, activation)


def encode_backward(cache, gout, agg, w_self, w_nbr):
    """Backprop through :func:`encode`.

    Returns ``(g_w_self, g_w_nbr, row_ids, row_grads)`` where the row
    gradients cover the encoded entities and their neighbors.
    """
    ids, x, m, out, activation = cache
    gpre = gout * (1.0 - out * out) if activation == "tanh" else gout
    g_ws = x.T @ gpre
    g_wn = m.T @ gpre
    gx = gpre @ w_self.T
    gm = gpre @ w_nbr.T
    # neighbor rows: agg[ids]^T @ gm, kept sparse over touched rows
    sub = agg[ids].tocoo()
    contrib = sub.data[:, None] * gm[sub.row]
    all_ids = np.concatenate([ids, sub.col.astype(np.int64)])
    all_g = np.concatenate([gx, contrib])
    uniq, inv = np.unique(all_ids, return_inverse=True)
    row_g = np.zeros((len(uniq), x.shape[1]))
    np.add.at(row_g, inv, all_g)
    return g_ws, g_wn, uniq, row_g


def agg_encode(kg: KnowledgeGraph, entity: int, table, w_self, w_nbr, activation="tanh"):
    """Encoding of a single entity."""
    out, _ = encode(table, aggregation_matrix(kg), [entity], w_self, w_nbr, activation)
    return out[0]


def agg_pair_loss(e1, e2, e_anchor, e_neg, margin: float):
    """``sum ||e1 - e2||^2 + sum max(0, margin - ||e_anchor - e_neg||)``.

    ``e_anchor`` repeats the source encoding once per negative.
    """
    diff = e1 - e2
    loss = float(np.einsum("ij,ij->", diff, diff))
    v = e_anchor - e_neg
    d = _norm(v, "L2")
    hinge = margin - d
    active = (hinge > 0)[:, None]
    loss += float(np.maximum(hinge, 0.0).sum())
    gv = -_norm_grad(v, "L2") * active
    return loss, {"e1": 2 * diff, "e2": -2 * diff, "e_anchor": gv, "e_neg": -gv}


def agg_align_loss(ent1, ent2, w_self, w_nbr, agg1, agg2, pairs, negatives, cfg: AggAlignConfig):
    """Alignment loss through the shared encoder.

    ``pairs`` is ``(b, 2)`` source/target ids, ``negatives`` is ``(b, n)``
    target ids.  Returns ``(loss, grads)`` with ``grads`` holding
    ``w_self``, ``w_nbr`` (dense) and ``ent1``/``ent2`` as ``(ids, rows)``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(len(pairs), -1)
    if len(pairs) == 0:
        raise ValueError("empty batch")
    n_neg = negatives.shape[1]
    act = cfg.activation
    e1, c1 = encode(ent1, agg1, pairs[:, 0], w_self, w_nbr, act)
    tgt_ids = np.concatenate([pairs[:, 1], negatives.ravel()])
    e_t, c2 = encode(ent2, agg2, tgt_ids, w_self, w_nbr, act)
    e2, e_neg = e_t[: len(pairs)], e_t[len(pairs) :]
    anchor = np.repeat(e1, n_neg, axis=0)
    loss, g = agg_pair_loss(e1, e2, anchor, e_neg, cfg.margin)
    g_e1 = g["e1"] + g["e_anchor"].reshape(len(pairs), n_neg, -1).sum(axis=1)
    g_et = np.concatenate([g["e2"], g["e_neg"]])
    gs1, gn1, ids1, rows1 = encode_backward(c1, g_e1, agg1, w_self, w_nbr)
    gs2, gn2, ids2, rows2 = encode_backward(c2, g_et, agg2, w_self, w_nbr)
    return loss, {
        "w_self": gs1 + gs2,
        "w_nbr": gn1 + gn2,
        "ent1": (ids1, rows1),
        "ent2": (ids2, rows2),
    }


# ---------------------------------------------------------------------------
# truncated negative sampling


def truncated_pool_size(n_entities: int, epsilon: float) -> int:
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    if n_entities < 2:
        raise ValueError("need at least two entities to draw negatives")
    return min(n_entities - 1, max(1, math.ceil((1.0 - epsilon) * n_entities - 1e-9)))


def truncated_pools(table: np.ndarray, epsilon: float, workers: int = 1) -> np.ndarray:
    """For every row, the ids of its nearest other rows (euclidean).

    Shape ``(n, pool)`` with ``pool = max(1, ceil((1 - epsilon) * n))``.
    """
    if table.shape[0] == 0:
        raise ValueError("empty table")
    n = table.shape[0]
    pool = truncated_pool_size(n, epsilon)
    idx, _ = knn(table, table, pool + 1, "euclidean", workers)
    keep = idx != np.arange(n)[:, None]
    # drop self, or the farthest candidate when self was not returned
    keep[keep.all(axis=1), -1] = False
    return idx[keep].reshape(n, pool)


def sample_from_pools(entities, pools: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws per entity from its pool; without replacement when possible."""
    entities = np.asarray(entities, dtype=np.int64)
    cand = pools[entities]
    pool = cand.shape[1]
    if n <= pool:
        order = np.argsort(rng.random((len(entities), pool)), axis=1)[:, :n]
    else:
        order = rng.integers(0, pool, size=(len(entities), n))
    return np.take_along_axis(cand, order, axis=1)


def truncated_negatives(entity: int, table: np.ndarray, epsilon: float, n: int, rng) -> np.ndarray:
    """Negatives for one entity drawn from its truncated nearest-neighbor pool."""
    if table.shape[0] == 0:
        raise ValueError("empty table")
    pool = truncated_pool_size(table.shape[0], epsilon)
    idx, _ = knn(table[[entity]], table, min(pool + 1, table.shape[0]))
    cand = [i for i in idx[0].tolist() if i != entity][:pool]
    return sample_from_pools([0], np.asarray([cand]), n, rng)[0]


def corrupt_triples(triples: np.ndarray, pools: np.ndarray, n_neg: int, rng) -> np.ndarray:
    """Replace head or tail (coin flip) of each triple ``n_neg`` times."""
    rep = np.repeat(triples, n_neg, axis=0)
    heads = rng.random(len(rep)) < 0.5
    col = np.where(heads, 0, 2)
    victims = rep[np.arange(len(rep)), col]
    repl = sample_from_pools(victims, pools, 1, rng)[:, 0]
    out = rep.copy()
    out[np.arange(len(rep)), col] = repl
    return out
