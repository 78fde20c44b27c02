"""Dataset construction: aligned-core pruning, dangling injection, splits.

The construction runs in two steps.  :func:`prune_to_bijection` deletes
unlinked entities (and their triples) from both graphs until every remaining
entity is linked one-to-one and still has a triple.  :func:`inject_dangling`
then removes a disjoint set of linked entities on each side, so that their
counterparts in the other graph become dangling.
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .kg import (
    SPLITS,
    AlignmentStore,
    KnowledgeGraph,
    neighbors,
    parse_entity_list,
    parse_triples,
    write_entity_list,
    write_links,
    write_triples,
)

logger = logging.getLogger(__name__)


class ForgeError(ValueError):
    pass


def make_rng(seed) -> np.random.Generator:
    """The project-wide PRNG: PCG64 seeded with a 64-bit integer.

    An existing generator is passed through unchanged.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


@dataclass
class ForgeConfig:
    removal_fraction_source: float = 0.25
    removal_fraction_target: float = 0.40
    split_ratios: tuple[float, float, float] = (0.3, 0.2, 0.5)
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("removal_fraction_source", "removal_fraction_target"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ForgeError(f"{name}={v} outside [0, 1)")
        if self.removal_fraction_source + self.removal_fraction_target >= 1.0:
            raise ForgeError("removal fractions must sum to less than 1")
        ratios = tuple(float(r) for r in self.split_ratios)
        if len(ratios) != 3 or any(r < 0 for r in ratios):
            raise ForgeError(f"bad split ratios {self.split_ratios}")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ForgeError(f"split ratios sum to {sum(ratios)}, not 1")
        self.split_ratios = ratios


def prune_to_bijection(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    links: list[tuple[int, int]],
) -> tuple[KnowledgeGraph, KnowledgeGraph, list[tuple[int, int]]]:
    """Iteratively delete unlinked or triple-less entities from both graphs.

    Deletions cascade: an entity losing its last triple is deleted, which
    deletes its link, which may leave its counterpart unlinked.  Returned
    links are re-indexed into the pruned graphs.
    """
    if not links:
        raise ForgeError("no aligned core: link set is empty")
    srcs = [s for s, _ in links]
    tgts = [t for _, t in links]
    if len(set(srcs)) != len(srcs) or len(set(tgts)) != len(tgts):
        raise ForgeError("links are not one-to-one")

    alive1 = np.zeros(kg1.num_entities, dtype=bool)
    alive2 = np.zeros(kg2.num_entities, dtype=bool)
    alive1[srcs] = True
    alive2[tgts] = True
    link_of1 = dict(links)
    link_of2 = {t: s for s, t in links}

    def live_degree(kg, alive):
        h, t = kg.triples[:, 0], kg.triples[:, 2]
        ok = alive[h] & alive[t]
        deg = np.bincount(h[ok], minlength=kg.num_entities)
        deg += np.bincount(t[ok & (h != t)], minlength=kg.num_entities)
        return deg

    while True:
        dead1 = alive1 & (live_degree(kg1, alive1) == 0)
        dead2 = alive2 & (live_degree(kg2, alive2) == 0)
        if not dead1.any() and not dead2.any():
            break
        alive1 &= ~dead1
        alive2 &= ~dead2
        # a deleted entity takes its link, orphaning the counterpart
        for s in np.flatnonzero(dead1):
            alive2[link_of1[int(s)]] = False
        for t in np.flatnonzero(dead2):
            alive1[link_of2[int(t)]] = False

    if not alive1.any():
        raise ForgeError("no aligned core: pruning removed every entity")
    new1 = kg1.subgraph(np.flatnonzero(alive1).tolist())
    new2 = kg2.subgraph(np.flatnonzero(alive2).tolist())
    new_links = [
        (new1.entity_id(kg1.entities[s]), new2.entity_id(kg2.entities[t]))
        for s, t in links
        if alive1[s] and alive2[t]
    ]
    return new1, new2, new_links


def _removal_ok(kg: KnowledgeGraph, alive: np.ndarray, deg: np.ndarray, e: int) -> bool:
    """Removing ``e`` must not strip any surviving neighbor of all its triples."""
    shared: Counter[int] = Counter()
    for _, n, _ in kg.adjacency[e]:
        if n != e and alive[n]:
            shared[n] += 1
    return all(deg[n] - c > 0 for n, c in shared.items())


def _remove(kg: KnowledgeGraph, alive: np.ndarray, deg: np.ndarray, e: int) -> None:
    for _, n, _ in kg.adjacency[e]:
        if n != e and alive[n]:
            deg[n] -= 1
    alive[e] = False
    deg[e] = 0


def inject_dangling(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    links: list[tuple[int, int]],
    cfg: ForgeConfig,
) -> tuple[KnowledgeGraph, KnowledgeGraph, AlignmentStore]:
    """Remove disjoint sets of linked entities to create dangling counterparts.

    ``removal_fraction_source`` of the links lose their source entity (the
    target becomes dangling); ``removal_fraction_target`` lose their target
    entity (the source becomes dangling).  Candidates whose removal would
    leave a surviving entity without triples are skipped.  The returned store
    is unsplit.
    """
    n = len(links)
    quota1 = int(round(cfg.removal_fraction_source * n))
    quota2 = int(round(cfg.removal_fraction_target * n))
    rng = make_rng(cfg.rng_seed)
    order = rng.permutation(n)

    alive1 = np.ones(kg1.num_entities, dtype=bool)
    alive2 = np.ones(kg2.num_entities, dtype=bool)
    deg1 = kg1.degrees().copy()
    deg2 = kg2.degrees().copy()
    removed1: list[int] = []  # link positions whose source is removed
    removed2: list[int] = []

    for pos in order.tolist():
        if len(removed1) >= quota1 and len(removed2) >= quota2:
            break
        s, t = links[pos]
        fill1 = len(removed1) / quota1 if quota1 else 1.0
        fill2 = len(removed2) / quota2 if quota2 else 1.0
        sides = (1, 2) if fill1 <= fill2 else (2, 1)
        for side in sides:
            if side == 1 and len(removed1) < quota1:
                if _removal_ok(kg1, alive1, deg1, s):
                    _remove(kg1, alive1, deg1, s)
                    removed1.append(pos)
                    break
            elif side == 2 and len(removed2) < quota2:
                if _removal_ok(kg2, alive2, deg2, t):
                    _remove(kg2, alive2, deg2, t)
                    removed2.append(pos)
                    break

    for got, want, label in ((removed1, quota1, "source"), (removed2, quota2, "target")):
        if len(got) < want:
            warnings.warn(
                f"{label} removal quota unreachable: removed {len(got)}/{n} "
                f"links ({len(got) / n:.4f}) instead of {want}",
                stacklevel=2,
            )

    new1 = kg1.subgraph(np.flatnonzero(alive1).tolist())
    new2 = kg2.subgraph(np.flatnonzero(alive2).tolist())
    gone = set(removed1) | set(removed2)
    store = AlignmentStore()
    for pos in sorted(set(range(n)) - gone):
        s, t = links[pos]
        store.pairs.append(
            (new1.entity_id(kg1.entities[s]), new2.entity_id(kg2.entities[t]), None)
        )
    for pos in sorted(removed1):
        t = links[pos][1]
        store.dangling_target.append((new2.entity_id(kg2.entities[t]), None))
    for pos in sorted(removed2):
        s = links[pos][0]
        store.dangling_source.append((new1.entity_id(kg1.entities[s]), None))
    store.validate()
    return new1, new2, store


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = int(round(ratios[0] * n))
    n_valid = min(int(round(ratios[1] * n)), n - n_train)
    return n_train, n_valid, n - n_train - n_valid


def split_dataset(
    store: AlignmentStore, cfg: ForgeConfig, require_nonempty: bool = True
) -> AlignmentStore:
    """Randomly partition pairs and both dangling sets into train/valid/test.

    Each collection is shuffled independently with a generator derived from
    ``cfg.rng_seed``.  With ``require_nonempty`` every split of a nonempty
    collection must receive at least one item.
    """
    rng = make_rng(cfg.rng_seed + 1)

    def assign(items, name):
        sizes = split_sizes(len(items), cfg.split_ratios)
        if items and require_nonempty and min(sizes) == 0:
            raise ForgeError(f"{name}: split sizes {sizes} leave a split empty")
        perm = rng.permutation(len(items))
        tags: list[str] = [""] * len(items)
        bounds = np.cumsum((0,) + sizes)
        for k, split in enumerate(SPLITS):
            for i in perm[bounds[k] : bounds[k + 1]]:
                tags[i] = split
        return tags

    tags = assign(store.pairs, "pairs")
    pairs = [(s, t, tag) for (s, t, _), tag in zip(store.pairs, tags)]
    tags = assign(store.dangling_source, "dangling_source")
    ds = [(e, tag) for (e, _), tag in zip(store.dangling_source, tags)]
    tags = assign(store.dangling_target, "dangling_target")
    dt = [(e, tag) for (e, _), tag in zip(store.dangling_target, tags)]
    out = AlignmentStore(pairs=pairs, dangling_source=ds, dangling_target=dt)
    out.validate()
    return out


def degree_histogram(kg: KnowledgeGraph, subset) -> dict[int, int]:
    """Map degree -> number of entities in ``subset`` with that degree."""
    deg = kg.degrees()
    return dict(sorted(Counter(int(deg[e]) for e in subset).items()))


def neighbor_overlap(
    pair: tuple[int, int],
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    reference_links,
) -> float:
    """Jaccard overlap of the two entities' neighborhoods.

    Target-side neighbors are mapped to their source counterparts through
    ``reference_links`` first; unmapped ones keep their own identity.  Two
    empty neighborhoods give 0.
    """
    ref = {(int(s), int(t)) for s, t in reference_links}
    if (int(pair[0]), int(pair[1])) not in ref:
        raise KeyError(f"pair {pair} not in reference alignment")
    to_src = {t: s for s, t in ref}
    left = {("s", n) for n in neighbors(kg1, pair[0])}
    right = {
        ("s", to_src[n]) if n in to_src else ("t", n) for n in neighbors(kg2, pair[1])
    }
    union = left | right
    if not union:
        return 0.0
    return len(left & right) / len(union)


def average_neighbor_overlap(kg1, kg2, reference_links) -> float:
    links = [(int(s), int(t)) for s, t in reference_links]
    if not links:
        return 0.0
    return float(np.mean([neighbor_overlap(p, kg1, kg2, links) for p in links]))


# ---------------------------------------------------------------------------
# dataset directories


def dataset_stats(kg1: KnowledgeGraph, kg2: KnowledgeGraph, store: AlignmentStore) -> dict:
    stats = {
        "kg1": {
            "entities": kg1.num_entities,
            "relations": kg1.num_relations,
            "triples": kg1.num_triples,
            "dangling": len(store.dangling_source),
        },
        "kg2": {
            "entities": kg2.num_entities,
            "relations": kg2.num_relations,
            "triples": kg2.num_triples,
            "dangling": len(store.dangling_target),
        },
        "alignment": len(store.pairs),
    }
    splits = {}
    for split in SPLITS:
        splits[split] = {
            "pairs": int(len(store.pairs_in(split))),
            "dangling_source": int(len(store.dangling_source_in(split))),
            "dangling_target": int(len(store.dangling_target_in(split))),
        }
    stats["splits"] = splits
    return stats


def save_dataset(
    out_dir: str | Path, kg1: KnowledgeGraph, kg2: KnowledgeGraph, store: AlignmentStore
) -> list[str]:
    """Write a split dataset directory; returns the written file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = ["kg1_triples.tsv", "kg2_triples.tsv"]
    write_triples(kg1, out / "kg1_triples.tsv")
    write_triples(kg2, out / "kg2_triples.tsv")
    for split in SPLITS:
        write_links(store.pairs_in(split).tolist(), kg1, kg2, out / f"links_{split}.tsv")
        write_entity_list(
            store.dangling_source_in(split), kg1, out / f"dangling_kg1_{split}.txt"
        )
        write_entity_list(
            store.dangling_target_in(split), kg2, out / f"dangling_kg2_{split}.txt"
        )
        written += [
            f"links_{split}.tsv",
            f"dangling_kg1_{split}.txt",
            f"dangling_kg2_{split}.txt",
        ]
    stats = dataset_stats(kg1, kg2, store)
    (out / "stats.json").write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n")
    written.append("stats.json")
    return written


def load_dataset(path: str | Path) -> tuple[KnowledgeGraph, KnowledgeGraph, AlignmentStore]:
    from .kg import parse_links

    root = Path(path)
    kg1 = parse_triples(root / "kg1_triples.tsv")
    kg2 = parse_triples(root / "kg2_triples.tsv")
    store = AlignmentStore()
    for split in SPLITS:
        f = root / f"links_{split}.tsv"
        if f.exists() and f.stat().st_size:
            pairs, _ = parse_links(f, kg1, kg2)
            store.pairs += [(s, t, split) for s, t in pairs]
        for name, kg, coll in (
            ("dangling_kg1", kg1, store.dangling_source),
            ("dangling_kg2", kg2, store.dangling_target),
        ):
            f = root / f"{name}_{split}.txt"
            if f.exists():
                coll += [(e, split) for e in parse_entity_list(f, kg)]
    store.validate()
    return kg1, kg2, store


def forge(
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    links: list[tuple[int, int]],
    cfg: ForgeConfig,
) -> tuple[KnowledgeGraph, KnowledgeGraph, AlignmentStore]:
    """Prune, inject dangling entities and split."""
    p1, p2, plinks = prune_to_bijection(kg1, kg2, links)
    logger.info(
        "aligned core: %d/%d entities, %d links",
        p1.num_entities,
        p2.num_entities,
        len(plinks),
    )
    d1, d2, store = inject_dangling(p1, p2, plinks, cfg)
    return d1, d2, split_dataset(store, cfg)


def config_dict(cfg: ForgeConfig) -> dict:
    d = asdict(cfg)
    d["split_ratios"] = list(cfg.split_ratios)
    return d
