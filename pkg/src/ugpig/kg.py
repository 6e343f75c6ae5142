"""Immutable typed triple store with adjacency access and graph statistics.

The store is generic over two graphs used by the recommender: the raw
region-feature graph and its pruned variant. Construction goes through
:class:`GraphBuilder`; after :meth:`GraphBuilder.freeze` the graph is
read-only and safe to share across threads.

Although triples are directed (region -> feature value), adjacency is stored
symmetrically so that region-feature-region paths can be walked in both
directions during aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np


class VocabularyError(KeyError):
    """Raised when an entity or relation id/name is not registered."""


class GraphFrozenError(RuntimeError):
    """Raised on attempts to mutate a frozen graph."""


class DensityUndefinedError(ValueError):
    """Raised when density is requested for a graph with fewer than 2 nodes."""


class EntityKind(IntEnum):
    REGION = 0
    FEATURE_VALUE = 1
    LEVEL_NODE = 2


class Vocab:
    """String <-> dense-integer interning, ids assigned in first-seen order."""

    __slots__ = ("_ids", "_names")

    def __init__(self, names: Iterable[str] = ()) -> None:
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._ids[name] = idx
            self._names.append(name)
        return idx

    def id_of(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise VocabularyError(f"unknown name: {name!r}") from None

    def name_of(self, idx: int) -> str:
        if not 0 <= idx < len(self._names):
            raise VocabularyError(f"id out of range: {idx}")
        return self._names[idx]

    def names(self) -> list[str]:
        return list(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocab) and self._names == other._names


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    density: float


class KnowledgeGraph:
    """Frozen triple store. Build via :class:`GraphBuilder`."""

    def __init__(
        self,
        entities: Vocab,
        kinds: Sequence[EntityKind],
        relations: Vocab,
        triples: Sequence[tuple[int, int, int]],
    ) -> None:
        self.entities = entities
        self.kinds = tuple(kinds)
        self.relations = relations
        self.triples = tuple(triples)
        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(len(entities))]
        for head, rel, tail in self.triples:
            adjacency[head].append((rel, tail))
            adjacency[tail].append((rel, head))
        self._adjacency = tuple(tuple(sorted(pairs)) for pairs in adjacency)
        self._csr: tuple[np.ndarray, ...] | None = None

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    @property
    def num_triples(self) -> int:
        return len(self.triples)

    def kind_of(self, entity: int) -> EntityKind:
        if not 0 <= entity < self.num_entities:
            raise VocabularyError(f"entity id out of range: {entity}")
        return self.kinds[entity]

    def neighbors(self, entity: int) -> tuple[tuple[int, int], ...]:
        """Relation-entity pairs adjacent to ``entity``, sorted by (relation, entity)."""
        if not 0 <= entity < self.num_entities:
            raise VocabularyError(f"entity id out of range: {entity}")
        return self._adjacency[entity]

    def degree(self, entity: int) -> int:
        return len(self.neighbors(entity))

    def region_ids(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == EntityKind.REGION]

    def stats(self) -> GraphStats:
        return graph_density(self)

    def adjacency_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flattened symmetric adjacency as (dst, rel, src, inv_degree) arrays.

        ``dst``/``rel``/``src`` have one entry per directed adjacency pair
        (2 x triple count), grouped by destination node in neighbor order;
        ``inv_degree`` is 1/degree per node, 0 for isolated nodes.
        """
        if self._csr is None:
            dst: list[int] = []
            rel: list[int] = []
            src: list[int] = []
            for node, pairs in enumerate(self._adjacency):
                for r, v in pairs:
                    dst.append(node)
                    rel.append(r)
                    src.append(v)
            degrees = np.array([len(p) for p in self._adjacency], dtype=np.float64)
            inv_deg = np.zeros_like(degrees)
            np.divide(1.0, degrees, out=inv_deg, where=degrees > 0)
            self._csr = (
                np.asarray(dst, dtype=np.int64),
                np.asarray(rel, dtype=np.int64),
                np.asarray(src, dtype=np.int64),
                inv_deg,
            )
        return self._csr


class GraphBuilder:
    """Single-writer accumulator for a :class:`KnowledgeGraph`."""

    def __init__(self) -> None:
        self._entities = Vocab()
        self._kinds: list[EntityKind] = []
        self._relations = Vocab()
        self._triples: list[tuple[int, int, int]] = []
        self._seen: set[tuple[int, int, int]] = set()
        self._frozen = False

    @property
    def num_entities(self) -> int:
        return len(self._entities)

    def add_entity(self, name: str, kind: EntityKind) -> int:
        self._check_mutable()
        idx = self._entities.add(name)
        if idx == len(self._kinds):
            self._kinds.append(kind)
        elif self._kinds[idx] != kind:
            raise VocabularyError(
                f"entity {name!r} already registered with kind {self._kinds[idx].name}"
            )
        return idx

    def add_relation(self, name: str) -> int:
        self._check_mutable()
        return self._relations.add(name)

    def add_triple(self, head: int, relation: int, tail: int) -> None:
        """Insert a triple; duplicates are a no-op, self-loops are rejected."""
        self._check_mutable()
        for entity in (head, tail):
            if not 0 <= entity < len(self._entities):
                raise VocabularyError(f"entity id out of range: {entity}")
        if not 0 <= relation < len(self._relations):
            raise VocabularyError(f"relation id out of range: {relation}")
        if head == tail:
            raise ValueError(f"self-loop rejected for entity {head}")
        key = (head, relation, tail)
        if key in self._seen:
            return
        self._seen.add(key)
        self._triples.append(key)

    def add_triple_by_name(self, head: str, relation: str, tail: str) -> None:
        self.add_triple(
            self._entities.id_of(head),
            self._relations.id_of(relation),
            self._entities.id_of(tail),
        )

    def freeze(self) -> KnowledgeGraph:
        self._check_mutable()
        self._frozen = True
        return KnowledgeGraph(self._entities, self._kinds, self._relations, self._triples)

    def _check_mutable(self) -> None:
        if self._frozen:
            raise GraphFrozenError("graph builder already frozen")


def graph_density(graph: KnowledgeGraph) -> GraphStats:
    """Node/edge counts plus undirected simple-graph density E / (V*(V-1)/2)."""
    nodes = graph.num_entities
    edges = graph.num_triples
    if nodes < 2:
        raise DensityUndefinedError(f"density undefined for node_count={nodes}")
    return GraphStats(node_count=nodes, edge_count=edges, density=edges / (nodes * (nodes - 1) / 2))


# Level nodes produced by pruning are named "<relation>:<label>"; the triple
# TSV carries no explicit kinds, so the loader recovers them from that naming.
def _infer_tail_kind(relation: str, tail: str) -> EntityKind:
    return EntityKind.LEVEL_NODE if tail.startswith(relation + ":") else EntityKind.FEATURE_VALUE


def write_triples_tsv(graph: KnowledgeGraph, path: str | Path) -> None:
    """One ``head<TAB>relation<TAB>tail`` line per triple, UTF-8."""
    with open(path, "w", encoding="utf-8") as fh:
        for head, rel, tail in graph.triples:
            fh.write(
                f"{graph.entities.name_of(head)}\t"
                f"{graph.relations.name_of(rel)}\t"
                f"{graph.entities.name_of(tail)}\n"
            )


def read_triples_tsv(path: str | Path) -> KnowledgeGraph:
    """Load a graph from a triple TSV; ``#``-prefixed comment lines are ignored.

    Heads are registered as regions, tails as feature-value or level nodes.
    """
    builder = GraphBuilder()
    staged: list[tuple[str, str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            staged.append((parts[0], parts[1], parts[2]))
    # Register all heads first so region ids form a dense prefix of the vocabulary.
    heads = {head for head, _, _ in staged}
    for head, _, _ in staged:
        builder.add_entity(head, EntityKind.REGION)
    for head, rel, tail in staged:
        r = builder.add_relation(rel)
        h = builder.add_entity(head, EntityKind.REGION)
        kind = EntityKind.REGION if tail in heads else _infer_tail_kind(rel, tail)
        t = builder.add_entity(tail, kind)
        builder.add_triple(h, r, t)
    return builder.freeze()
