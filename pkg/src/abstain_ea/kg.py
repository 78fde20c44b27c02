"""Knowledge graph data model and plain-text ingestion.

Triple files hold one ``head<TAB>relation<TAB>tail`` record per line, link
files one ``source<TAB>target`` record per line, and entity-list files one
entity name per line.  Everything is UTF-8 with LF line endings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")

# direction flags stored in adjacency records
OUT, IN = 0, 1


class ParseError(ValueError):
    """Raised for malformed input files."""


@dataclass(frozen=True)
class KnowledgeGraph:
    """Immutable set of relational triples with dense index vocabularies.

    ``adjacency[e]`` lists ``(relation, neighbor, direction)`` records; every
    triple contributes one OUT record at its head and one IN record at its
    tail, except self-loops which are recorded once.
    """

    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: np.ndarray  # (n, 3) int64: head, relation, tail
    adjacency: tuple[tuple[tuple[int, int, int], ...], ...] = field(repr=False)
    _ent_index: dict = field(repr=False, compare=False)
    _rel_index: dict = field(repr=False, compare=False)

    @classmethod
    def from_triples(
        cls,
        triples: Iterable[tuple[str, str, str]],
        entities: Sequence[str] | None = None,
        relations: Sequence[str] | None = None,
    ) -> "KnowledgeGraph":
        """Build a graph from string triples.

        Vocabularies follow first-appearance order unless given explicitly
        (explicit vocabularies may contain isolated entities).  Duplicate
        triples are dropped.
        """
        ent_index: dict[str, int] = {}
        rel_index: dict[str, int] = {}
        for name in entities or ():
            ent_index.setdefault(name, len(ent_index))
        for name in relations or ():
            rel_index.setdefault(name, len(rel_index))

        seen: set[tuple[int, int, int]] = set()
        rows: list[tuple[int, int, int]] = []
        for h, r, t in triples:
            hi = ent_index.setdefault(h, len(ent_index))
            ri = rel_index.setdefault(r, len(rel_index))
            ti = ent_index.setdefault(t, len(ent_index))
            key = (hi, ri, ti)
            if key not in seen:
                seen.add(key)
                rows.append(key)
        return cls._build(tuple(ent_index), tuple(rel_index), rows)

    @classmethod
    def _build(cls, entities, relations, rows) -> "KnowledgeGraph":
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
        n_ent, n_rel = len(entities), len(relations)
        if arr.size and (
            arr[:, [0, 2]].min() < 0
            or arr[:, [0, 2]].max() >= n_ent
            or arr[:, 1].min() < 0
            or arr[:, 1].max() >= n_rel
        ):
            raise ValueError("triple index out of vocabulary bounds")
        adj: list[list[tuple[int, int, int]]] = [[] for _ in range(n_ent)]
        for h, r, t in arr.tolist():
            adj[h].append((r, t, OUT))
            if h != t:
                adj[t].append((r, h, IN))
        arr.setflags(write=False)
        return cls(
            entities=tuple(entities),
            relations=tuple(relations),
            triples=arr,
            adjacency=tuple(tuple(a) for a in adj),
            _ent_index={e: i for i, e in enumerate(entities)},
            _rel_index={r: i for i, r in enumerate(relations)},
        )

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_triples(self) -> int:
        return int(self.triples.shape[0])

    def entity_id(self, name: str) -> int:
        try:
            return self._ent_index[name]
        except KeyError:
            raise KeyError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._rel_index[name]
        except KeyError:
            raise KeyError(f"unknown relation {name!r}") from None

    def has_entity(self, name: str) -> bool:
        return name in self._ent_index

    def string_triples(self) -> list[tuple[str, str, str]]:
        E, R = self.entities, self.relations
        return [(E[h], R[r], E[t]) for h, r, t in self.triples.tolist()]

    def degrees(self) -> np.ndarray:
        """Number of triples incident to each entity (self-loops count once)."""
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def neighbor_lists(self) -> list[list[int]]:
        """Sorted distinct neighbor indices per entity."""
        return [sorted({n for _, n, _ in a}) for a in self.adjacency]

    def subgraph(self, keep: Iterable[int]) -> "KnowledgeGraph":
        """Induced subgraph on ``keep``; relative vocabulary order is preserved.

        Relations no longer used by any triple are dropped.
        """
        keep_set = set(keep)
        kept_ents = [e for i, e in enumerate(self.entities) if i in keep_set]
        rows = [
            (self.entities[h], self.relations[r], self.entities[t])
            for h, r, t in self.triples.tolist()
            if h in keep_set and t in keep_set
        ]
        used_rels = {r for _, r, _ in rows}
        rels = [r for r in self.relations if r in used_rels]
        return KnowledgeGraph.from_triples(rows, entities=kept_ents, relations=rels)


def neighbors(kg: KnowledgeGraph, e: int | str) -> set[int]:
    """Entities adjacent to ``e`` through any triple, in either direction.

    ``e`` itself is included only when a self-loop ``(e, r, e)`` exists.
    """
    idx = kg.entity_id(e) if isinstance(e, str) else int(e)
    if not 0 <= idx < kg.num_entities:
        raise KeyError(f"unknown entity index {idx}")
    return {n for _, n, _ in kg.adjacency[idx]}


@dataclass
class AlignmentStore:
    """Alignment pairs and dangling labels, each tagged with a split.

    ``pairs`` holds ``(source, target, split)`` index triples,
    ``dangling_source``/``dangling_target`` hold ``(entity, split)``.
    ``split`` is ``None`` before :func:`abstain_ea.forge.split_dataset`.
    """

    pairs: list[tuple[int, int, str | None]] = field(default_factory=list)
    dangling_source: list[tuple[int, str | None]] = field(default_factory=list)
    dangling_target: list[tuple[int, str | None]] = field(default_factory=list)

    def validate(self) -> None:
        srcs = [s for s, _, _ in self.pairs]
        tgts = [t for _, t, _ in self.pairs]
        if len(set(srcs)) != len(srcs) or len(set(tgts)) != len(tgts):
            raise ValueError("alignment pairs are not one-to-one")
        ds = [e for e, _ in self.dangling_source]
        dt = [e for e, _ in self.dangling_target]
        if len(set(ds)) != len(ds) or len(set(dt)) != len(dt):
            raise ValueError("duplicate dangling entity")
        if set(srcs) & set(ds):
            raise ValueError("source entity is both aligned and dangling")
        if set(tgts) & set(dt):
            raise ValueError("target entity is both aligned and dangling")
        for coll in (self.pairs, self.dangling_source, self.dangling_target):
            for item in coll:
                if item[-1] not in (None, *SPLITS):
                    raise ValueError(f"bad split tag {item[-1]!r}")

    def pairs_in(self, split: str) -> np.ndarray:
        rows = [(s, t) for s, t, sp in self.pairs if sp == split]
        return np.asarray(rows, dtype=np.int64).reshape(-1, 2)

    def dangling_source_in(self, split: str) -> np.ndarray:
        return np.asarray(
            [e for e, sp in self.dangling_source if sp == split], dtype=np.int64
        )

    def dangling_target_in(self, split: str) -> np.ndarray:
        return np.asarray(
            [e for e, sp in self.dangling_target if sp == split], dtype=np.int64
        )


def _read_lines(path: str | Path) -> list[str]:
    text = Path(path).read_text(encoding="utf-8")
    return text.split("\n")


def parse_triples(path: str | Path) -> KnowledgeGraph:
    """Read a tab-separated triple file."""
    rows = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        rows.append(tuple(fields))
    if not rows:
        raise ParseError(f"{path}: no triples")
    return KnowledgeGraph.from_triples(rows)


def parse_links(
    path: str | Path,
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    lenient: bool = False,
) -> tuple[list[tuple[int, int]], int]:
    """Read a tab-separated link file into index pairs.

    Returns ``(pairs, skipped)``.  In strict mode unknown names raise; in
    lenient mode such lines are skipped and counted.  Links must be
    one-to-one in both modes.
    """
    pairs: list[tuple[int, int]] = []
    skipped = 0
    seen_src: dict[int, int] = {}
    seen_tgt: dict[int, int] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\r").split("\t")
        if len(fields) != 2:
            raise ParseError(
                f"{path}:{lineno}: expected 2 tab-separated fields, got {len(fields)}"
            )
        a, b = fields
        if not (kg1.has_entity(a) and kg2.has_entity(b)):
            if lenient:
                skipped += 1
                continue
            missing = a if not kg1.has_entity(a) else b
            raise ParseError(f"{path}:{lineno}: unknown entity {missing!r}")
        s, t = kg1.entity_id(a), kg2.entity_id(b)
        if s in seen_src:
            raise ParseError(
                f"{path}:{lineno}: source {a!r} duplicated (first on line {seen_src[s]})"
            )
        if t in seen_tgt:
            raise ParseError(
                f"{path}:{lineno}: target {b!r} duplicated (first on line {seen_tgt[t]})"
            )
        seen_src[s] = lineno
        seen_tgt[t] = lineno
        pairs.append((s, t))
    if skipped:
        logger.warning("skipped %d links with unknown entities in %s", skipped, path)
    return pairs, skipped


def parse_entity_list(path: str | Path, kg: KnowledgeGraph) -> list[int]:
    out = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        name = line.rstrip("\r")
        if not name:
            continue
        if not kg.has_entity(name):
            raise ParseError(f"{path}:{lineno}: unknown entity {name!r}")
        out.append(kg.entity_id(name))
    return out


def write_triples(kg: KnowledgeGraph, path: str | Path) -> None:
    lines = ["\t".join(t) + "\n" for t in kg.string_triples()]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def write_links(
    pairs: Iterable[tuple[int, int]],
    kg1: KnowledgeGraph,
    kg2: KnowledgeGraph,
    path: str | Path,
) -> None:
    lines = [f"{kg1.entities[s]}\t{kg2.entities[t]}\n" for s, t in pairs]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def write_entity_list(ids: Iterable[int], kg: KnowledgeGraph, path: str | Path) -> None:
    lines = [kg.entities[i] + "\n" for i in ids]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")
