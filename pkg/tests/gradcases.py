"""Random small instances of every loss for finite-difference checks.

Each ``case_*`` function returns ``(loss_fn, params, analytic)`` ready for
:func:`abstain_ea.embed.finite_diff_check`, or ``None`` when the draw lands
within ``KINK`` of a hinge or norm kink.
"""

import numpy as np

from abstain_ea.aligners import (
    AggAlignConfig,
    MTransEConfig,
    agg_align_loss,
    aggregation_matrix,
    mtranse_align_loss,
    mtranse_triple_loss,
)
from abstain_ea.detect import BrConfig, MrConfig, NncParams, br_loss, mr_loss, nnc_loss
from abstain_ea.kg import KnowledgeGraph

KINK = 1e-3


def _dim(rng):
    return int(rng.integers(2, 9))


def _norm_safe(v, norm):
    if norm == "L1":
        return np.all(np.abs(v) > KINK)
    return np.all(np.linalg.norm(v, axis=-1) > KINK)


def case_triple(rng):
    d, b = _dim(rng), int(rng.integers(1, 5))
    norm = "L1" if rng.random() < 0.5 else "L2"
    cfg = MTransEConfig(triple_margin=float(rng.uniform(0.2, 2.0)), norm=norm)
    names = ("pos_h", "pos_r", "pos_t", "neg_h", "neg_r", "neg_t")
    params = {k: rng.normal(size=(b, d)) * 0.5 for k in names}
    vp = params["pos_h"] + params["pos_r"] - params["pos_t"]
    vn = params["neg_h"] + params["neg_r"] - params["neg_t"]
    if not (_norm_safe(vp, norm) and _norm_safe(vn, norm)):
        return None
    sp = np.abs(vp).sum(1) if norm == "L1" else np.linalg.norm(vp, axis=1)
    sn = np.abs(vn).sum(1) if norm == "L1" else np.linalg.norm(vn, axis=1)
    if np.any(np.abs(cfg.triple_margin + sp - sn) < KINK):
        return None
    _, grads = mtranse_triple_loss(*(params[k] for k in names), cfg)
    return (lambda p: mtranse_triple_loss(*(p[k] for k in names), cfg)[0]), params, grads


def case_align(rng):
    d, b = _dim(rng), int(rng.integers(1, 5))
    norm = "L1" if rng.random() < 0.5 else "L2"
    cfg = MTransEConfig(norm=norm, align_weight=float(rng.uniform(0.5, 2.0)))
    params = {"x1": rng.normal(size=(b, d)), "x2": rng.normal(size=(b, d)),
              "transform": rng.normal(size=(d, d)) / np.sqrt(d)}
    if not _norm_safe(params["x1"] @ params["transform"].T - params["x2"], norm):
        return None
    _, grads = mtranse_align_loss(params["x1"], params["x2"], params["transform"], cfg)
    return (lambda p: mtranse_align_loss(p["x1"], p["x2"], p["transform"], cfg)[0]), params, grads


def _random_graph(rng, n, prefix):
    m = int(rng.integers(n, 3 * n))
    rows = [(f"{prefix}{rng.integers(n)}", "r", f"{prefix}{rng.integers(n)}") for _ in range(m)]
    return KnowledgeGraph.from_triples(rows, entities=[f"{prefix}{i}" for i in range(n)])


def case_agg(rng):
    d = _dim(rng)
    n1, n2 = int(rng.integers(3, 8)), int(rng.integers(3, 8))
    agg1 = aggregation_matrix(_random_graph(rng, n1, "a"))
    agg2 = aggregation_matrix(_random_graph(rng, n2, "b"))
    b, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    pairs = np.stack([rng.choice(n1, b, replace=False), rng.choice(n2, b, replace=False)], axis=1) \
        if b <= min(n1, n2) else None
    if pairs is None:
        return None
    negs = rng.integers(0, n2, size=(b, k))
    cfg = AggAlignConfig(margin=float(rng.uniform(0.5, 2.0)), dim=d,
                         activation="tanh" if rng.random() < 0.7 else "identity")
    params = {"ent1": rng.normal(size=(n1, d)), "ent2": rng.normal(size=(n2, d)),
              "w_self": rng.normal(size=(d, d)) / np.sqrt(d),
              "w_nbr": rng.normal(size=(d, d)) / np.sqrt(d)}

    def loss(p):
        return agg_align_loss(p["ent1"], p["ent2"], p["w_self"], p["w_nbr"], agg1, agg2,
                              pairs, negs, cfg)[0]

    # reject draws near the hinge or a zero distance
    from abstain_ea.aligners import encode

    e1, _ = encode(params["ent1"], agg1, pairs[:, 0], params["w_self"], params["w_nbr"], cfg.activation)
    en, _ = encode(params["ent2"], agg2, negs.ravel(), params["w_self"], params["w_nbr"], cfg.activation)
    dist = np.linalg.norm(np.repeat(e1, k, axis=0) - en, axis=1)
    if np.any(dist < KINK) or np.any(np.abs(cfg.margin - dist) < KINK):
        return None
    _, g = agg_align_loss(params["ent1"], params["ent2"], params["w_self"], params["w_nbr"],
                          agg1, agg2, pairs, negs, cfg)
    grads = {"w_self": g["w_self"], "w_nbr": g["w_nbr"]}
    for name, n in (("ent1", n1), ("ent2", n2)):
        dense = np.zeros((n, d))
        ids, rows = g[name]
        dense[ids] = rows
        grads[name] = dense
    return loss, params, grads


def case_nnc(rng):
    d, h, b = _dim(rng), int(rng.integers(1, 9)), int(rng.integers(1, 7))
    labels = rng.integers(0, 2, size=b)
    base = NncParams.initialize(d, h, rng)
    w0, w1 = float(rng.uniform(0.3, 3.0)), float(rng.uniform(0.3, 3.0))
    params = {"features": rng.normal(size=(b, d)), **base.arrays()}

    def unpack(p):
        return NncParams(p["w1"], p["b1"], p["w2"], p["b2"], w0, w1)

    _, grads = nnc_loss(params["features"], labels, unpack(params))
    return (lambda p: nnc_loss(p["features"], labels, unpack(p))[0]), params, grads


def case_mr(rng):
    d, b = _dim(rng), int(rng.integers(1, 6))
    cfg = MrConfig(margin=float(rng.uniform(0.2, 2.0)))
    params = {"x": rng.normal(size=(b, d)) * 0.5, "x_nn": rng.normal(size=(b, d)) * 0.5,
              "transform": rng.normal(size=(d, d)) / np.sqrt(d)}
    dist = np.linalg.norm(params["x"] @ params["transform"].T - params["x_nn"], axis=1)
    if np.any(dist < KINK) or np.any(np.abs(cfg.margin - dist) < KINK):
        return None
    _, grads = mr_loss(params["x"], params["x_nn"], params["transform"], cfg)
    return (lambda p: mr_loss(p["x"], p["x_nn"], p["transform"], cfg)[0]), params, grads


def case_br(rng):
    d, b, v = _dim(rng), int(rng.integers(1, 5)), int(rng.integers(1, 6))
    cfg = BrConfig(samples=v, alpha=float(rng.uniform(0.0, 0.1)))
    params = {"x": rng.normal(size=(b, d)), "targets": rng.normal(size=(b, v, d)),
              "transform": rng.normal(size=(d, d)) / np.sqrt(d)}
    _, grads, lam = br_loss(params["x"], params["targets"], params["transform"], cfg)
    u = params["x"] @ params["transform"].T
    dist = np.linalg.norm(u[:, None] - params["targets"], axis=2)
    if v == 1 or np.any(dist < KINK) or np.any(np.abs(lam[:, None] - dist) < KINK):
        return None
    if np.any(np.linalg.norm(params["x"], axis=1) < KINK):
        return None
    # the per-entity mean distance is a constant for differentiation
    return (lambda p: br_loss(p["x"], p["targets"], p["transform"], cfg, mean_dist=lam)[0]), \
        params, grads


CASES = {
    "mtranse_triple_loss": case_triple,
    "mtranse_align_loss": case_align,
    "agg_align_loss": case_agg,
    "nnc_loss": case_nnc,
    "mr_loss": case_mr,
    "br_loss": case_br,
}


def draw(name, rng, count):
    """``count`` accepted instances of the named loss."""
    out = []
    while len(out) < count:
        case = CASES[name](rng)
        if case is not None:
            out.append(case)
    return out
