"""Random knowledge graphs and relabeled isomorphic clones for end-to-end checks."""

from __future__ import annotations

import numpy as np

from .forge import make_rng
from .kg import KnowledgeGraph


def random_kg(
    n_entities: int = 300,
    n_triples: int = 1500,
    n_relations: int = 20,
    seed: int = 0,
    prefix: str = "e",
    structure: str = "latent",
    latent_dim: int = 8,
    tail_choices: int = 5,
) -> KnowledgeGraph:
    """Random multi-relational graph in which every entity has a triple.

    ``structure="uniform"`` draws heads and tails uniformly.  With
    ``"latent"`` every entity gets a hidden Gaussian position and every
    relation a hidden offset; the tail of ``(h, r, ?)`` is drawn among the
    ``tail_choices`` entities closest to ``pos[h] + off[r]``.  Relation
    choice is Zipf-skewed in both modes.
    """
    if structure not in ("latent", "uniform"):
        raise ValueError(f"unknown structure {structure!r}")
    if n_triples < n_entities:
        raise ValueError("need at least one triple per entity")
    rng = make_rng(seed)
    rel_p = 1.0 / np.arange(1, n_relations + 1)
    rel_p /= rel_p.sum()
    pos = rng.normal(size=(n_entities, latent_dim))
    off = rng.normal(size=(n_relations, latent_dim))
    seen: set[tuple[int, int, int]] = set()
    rows: list[tuple[int, int, int]] = []

    def draw_tail(h: int, r: int) -> int:
        if structure == "uniform":
            return int(rng.integers(0, n_entities))
        d = np.linalg.norm(pos - (pos[h] + off[r]), axis=1)
        d[h] = np.inf
        near = np.argsort(d, kind="stable")[:tail_choices]
        return int(near[rng.integers(0, len(near))])

    def add(h: int) -> None:
        for _ in range(100):
            r = int(rng.choice(n_relations, p=rel_p))
            t = draw_tail(h, r)
            if h != t and (h, r, t) not in seen:
                seen.add((h, r, t))
                rows.append((h, r, t))
                return

    # every entity heads at least one triple
    for h in rng.permutation(n_entities).tolist():
        add(h)
    while len(rows) < n_triples:
        add(int(rng.integers(0, n_entities)))
    names = [f"{prefix}{i}" for i in range(n_entities)]
    rels = [f"{prefix}_r{i}" for i in range(n_relations)]
    return KnowledgeGraph.from_triples(
        [(names[h], rels[r], names[t]) for h, r, t in rows[:n_triples]]
    )


def isomorphic_clone(
    kg: KnowledgeGraph, seed: int = 1, prefix: str = "k2_"
) -> tuple[KnowledgeGraph, list[tuple[int, int]]]:
    """Copy of ``kg`` with fresh identifiers and shuffled triple order.

    Returns the clone and the exact one-to-one links ``(kg id, clone id)``.
    """
    rng = make_rng(seed)
    ent_perm = rng.permutation(kg.num_entities)
    rel_perm = rng.permutation(kg.num_relations)
    ent_name = {i: f"{prefix}x{int(p)}" for i, p in enumerate(ent_perm)}
    rel_name = {i: f"{prefix}p{int(p)}" for i, p in enumerate(rel_perm)}
    order = rng.permutation(kg.num_triples)
    rows = [
        (ent_name[h], rel_name[r], ent_name[t])
        for h, r, t in kg.triples[order].tolist()
    ]
    clone = KnowledgeGraph.from_triples(rows)
    links = [(i, clone.entity_id(ent_name[i])) for i in range(kg.num_entities)]
    return clone, links
