"""Dangling-entity detection: NN classification (NNC), marginal ranking
(MR) and background ranking (BR) objectives plus inference rules.

Vectors are rows; the transform acts as ``x @ M.T``.  Nearest-neighbor
vectors and the per-entity mean distance of BR are treated as constants
when differentiating.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nnindex import nearest

TECHNIQUES = ("nnc", "mr", "br")


@dataclass
class NncParams:
    """Two-layer FFN: ``h = tanh(f W1 + b1)``, ``logit = h W2 + b2``."""

    w1: np.ndarray  # (dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, 1)
    b2: np.ndarray  # (1,)
    w0: float = 1.0  # label weight for matchable (y=0)
    w_pos: float = 1.0  # label weight for dangling (y=1)

    @classmethod
    def initialize(cls, dim: int, hidden: int | None, rng) -> "NncParams":
        from .embed import xavier_init

        hidden = hidden or dim
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        return cls(
            w1=xavier_init(dim, hidden, rng),
            b1=np.zeros(hidden),
            w2=xavier_init(hidden, 1, rng),
            b2=np.zeros(1),
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass
class MrConfig:
    margin: float = 0.9

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError("MR margin must be > 0")


@dataclass
class BrConfig:
    samples: int = 20
    alpha: float = 0.01

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("BR needs at least one sampled target per entity")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass(frozen=True)
class DanglingVerdict:
    entity: int
    is_dangling: bool
    confidence: float  # dangling probability (NNC) or NN distance (MR/BR)
    threshold: float
    nn_distance: float


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softplus(z):
    return np.logaddexp(0.0, z)


def nnc_logits(features: np.ndarray, p: NncParams):
    hidden = np.tanh(features @ p.w1 + p.b1)
    return (hidden @ p.w2 + p.b2)[:, 0], hidden


def nnc_forward(x, x_nn, transform, params: NncParams) -> np.ndarray:
    """Dangling probability ``sigmoid(FFN(M x - x_nn))`` per row."""
    x = np.atleast_2d(x)
    x_nn = np.atleast_2d(x_nn)
    if x.shape[1] != transform.shape[1] or x_nn.shape[1] != transform.shape[0]:
        raise ValueError("dimension mismatch")
    if transform.shape[0] != params.w1.shape[0]:
        raise ValueError("dimension mismatch between features and classifier")
    z, _ = nnc_logits(x @ transform.T - x_nn, params)
    return _sigmoid(z)


def weighted_bce(y, p, w=1.0) -> float:
    """Label-weighted cross-entropy on probabilities (``0 log 0 = 0``)."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.where(y > 0, y * np.log(p), 0.0)
        neg = np.where(y < 1, (1 - y) * np.log1p(-p), 0.0)
    return float(np.sum(-np.asarray(w) * (pos + neg)))


def label_weights(labels) -> tuple[float, float]:
    """``w_c = N / (2 N_c)`` for classes 0 (matchable) and 1 (dangling)."""
    labels = np.asarray(labels)
    n = len(labels)
    n1 = int((labels == 1).sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise ValueError("both labels must be present to compute label weights")
    return n / (2.0 * n0), n / (2.0 * n1)


def nnc_loss(features: np.ndarray, labels, params: NncParams):
    """Weighted cross-entropy of the classifier on difference features.

    ``features`` are ``M x - x_nn`` rows.  Returns ``(loss, grads)`` with
    gradients for ``w1, b1, w2, b2`` and ``features``.
    """
    y = np.asarray(labels, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("empty batch")
    z, hidden = nnc_logits(features, params)
    w = np.where(y > 0, params.w_pos, params.w0)
    loss = float(np.sum(w * (y * _softplus(-z) + (1 - y) * _softplus(z))))
    gz = (w * (_sigmoid(z) - y))[:, None]
    g_w2 = hidden.T @ gz
    g_b2 = gz.sum(axis=0)
    gh = (gz @ params.w2.T) * (1.0 - hidden * hidden)
    return loss, {
        "w1": features.T @ gh,
        "b1": gh.sum(axis=0),
        "w2": g_w2,
        "b2": g_b2,
        "features": gh @ params.w1.T,
    }


def mr_loss(x, x_nn, transform, cfg: MrConfig):
    """``sum max(0, margin - ||M x - x_nn||)``; grads for ``x`` and ``transform``."""
    if len(x) == 0:
        raise ValueError("empty batch")
    v = x @ transform.T - x_nn
    d = np.sqrt(np.einsum("ij,ij->i", v, v))
    hinge = cfg.margin - d
    loss = float(np.maximum(hinge, 0.0).sum())
    active = (hinge > 0) & (d > 0)
    gv = np.zeros_like(v)
    gv[active] = -v[active] / d[active, None]
    return loss, {"x": gv @ transform, "transform": gv.T @ x}


def br_loss(x, targets, transform, cfg: BrConfig, mean_dist=None):
    """Background ranking loss for a batch of dangling entities.

    ``targets`` has shape ``(b, v, dim)``.  Per entity the loss is
    ``sum_j |lambda_x - ||M x - t_j||| + alpha ||x||`` where ``lambda_x`` is
    the mean sampled distance.  ``mean_dist`` overrides ``lambda_x`` (it is
    always held constant for the gradient).  Returns
    ``(loss, grads, lambda_x)``.
    """
    if cfg.samples < 1 or targets.shape[1] == 0:
        raise ValueError("v must be >= 1")
    if len(x) == 0:
        raise ValueError("empty batch")
    u = x @ transform.T
    v = u[:, None, :] - targets
    d = np.sqrt(np.einsum("ijk,ijk->ij", v, v))
    lam = d.mean(axis=1) if mean_dist is None else np.asarray(mean_dist, dtype=np.float64)
    dev = lam[:, None] - d
    xn = np.linalg.norm(x, axis=1)
    loss = float(np.abs(dev).sum() + cfg.alpha * xn.sum())
    # d|lam - d_j|/d d_j = -sign(lam - d_j)
    coef = -np.sign(dev)
    unit = np.divide(v, d[..., None], out=np.zeros_like(v), where=d[..., None] > 0)
    gu = np.einsum("ij,ijk->ik", coef, unit)
    g_norm = np.divide(x, xn[:, None], out=np.zeros_like(x), where=xn[:, None] > 0)
    return loss, {"x": gu @ transform + cfg.alpha * g_norm, "transform": gu.T @ x}, lam


def detect(
    entities,
    technique: str,
    source_vectors: np.ndarray,
    target_vectors: np.ndarray,
    nnc: NncParams | None = None,
    mr: MrConfig | None = None,
    br_threshold: float | None = None,
    workers: int = 1,
) -> list[DanglingVerdict]:
    """Verdicts for ``entities`` (source ids).

    ``source_vectors`` are already transformed into the target space.
    NNC flags ``p > 0.5``; MR flags NN distance ``> margin``; BR flags NN
    distance above the mean NN distance of the evaluated entities, unless
    ``br_threshold`` supplies a precomputed one.
    """
    if technique not in TECHNIQUES:
        raise ValueError(f"unknown technique {technique!r}")
    if target_vectors.shape[0] == 0:
        raise ValueError("empty target space")
    ids = np.asarray(entities, dtype=np.int64)
    if len(ids) == 0:
        return []
    nn, dist = nearest(source_vectors[ids], target_vectors, workers)
    if technique == "nnc":
        if nnc is None:
            raise ValueError("NNC detection needs classifier parameters")
        z, _ = nnc_logits(source_vectors[ids] - target_vectors[nn], nnc)
        conf = _sigmoid(z)
        flags = conf > 0.5
        thr = np.full(len(ids), 0.5)
    elif technique == "mr":
        margin = (mr or MrConfig()).margin
        conf = dist
        flags = dist > margin
        thr = np.full(len(ids), margin)
    else:
        t = float(dist.mean()) if br_threshold is None else float(br_threshold)
        conf = dist
        flags = dist > t
        thr = np.full(len(ids), t)
    return [
        DanglingVerdict(int(e), bool(f), float(c), float(th), float(d))
        for e, f, c, th, d in zip(ids, flags, conf, thr, dist)
    ]


def write_verdicts(path: str | Path, verdicts, entity_names, nn_csls=None) -> None:
    """CSV ``entity,confidence,threshold,is_dangling,nn_distance[,nn_csls]``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["entity", "confidence", "threshold", "is_dangling", "nn_distance"]
        if nn_csls is not None:
            header.append("nn_csls")
        w.writerow(header)
        for i, v in enumerate(verdicts):
            row = [
                entity_names[v.entity],
                repr(v.confidence),
                repr(v.threshold),
                int(v.is_dangling),
                repr(v.nn_distance),
            ]
            if nn_csls is not None:
                row.append(repr(float(nn_csls[i])))
            w.writerow(row)


def read_verdicts(path: str | Path, name_to_id) -> list[DanglingVerdict]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                DanglingVerdict(
                    entity=name_to_id(row["entity"]),
                    is_dangling=row["is_dangling"] in ("1", "True", "true"),
                    confidence=float(row["confidence"]),
                    threshold=float(row["threshold"]),
                    nn_distance=float(row.get("nn_distance") or "nan"),
                )
            )
    if not out:
        warnings.warn(f"{path}: no verdicts", stacklevel=2)
    return out
