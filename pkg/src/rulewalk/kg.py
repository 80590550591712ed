"""Typed knowledge-graph store.

A :class:`KnowledgeGraph` is an immutable multigraph of ``(head, relation, tail)``
triples over typed nodes.  Every operation that changes the edge set returns a
new graph that shares the node table and schema.
"""
from __future__ import annotations

import csv
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import yaml

INVERSE_PREFIX = "_"


class GraphError(ValueError):
    """Raised for malformed graph input or contract violations."""


@dataclass(frozen=True)
class NodeRef:
    id: int
    label: str
    node_type: str


@dataclass(frozen=True)
class RelationRef:
    id: int
    label: str
    src_type: str
    dst_type: str
    is_inverse: bool = False
    inverse_of: int | None = None


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass(frozen=True)
class Schema:
    node_types: tuple[str, ...]
    relations: tuple[RelationRef, ...]
    allow_self_loops: bool = False

    def __post_init__(self):
        for i, rel in enumerate(self.relations):
            if rel.id != i:
                raise GraphError(f"relation ids must be dense, got {rel.id} at position {i}")
            for t in (rel.src_type, rel.dst_type):
                if t not in self.node_types:
                    raise GraphError(f"relation {rel.label!r} uses undeclared node type {t!r}")
        labels = [r.label for r in self.relations]
        if len(set(labels)) != len(labels):
            raise GraphError("relation labels must be unique")

    def relation(self, label: str) -> RelationRef:
        for rel in self.relations:
            if rel.label == label:
                return rel
        raise GraphError(f"unknown relation {label!r}")

    def has_relation(self, label: str) -> bool:
        return any(r.label == label for r in self.relations)

    @property
    def has_inverses(self) -> bool:
        return any(r.is_inverse for r in self.relations)

    @classmethod
    def from_dict(cls, data: dict) -> "Schema":
        try:
            node_types = tuple(data["node_types"])
            rels = tuple(
                RelationRef(i, r["label"], r["src"], r["dst"]) for i, r in enumerate(data["relations"])
            )
        except (KeyError, TypeError) as exc:
            raise GraphError(f"schema missing key {exc}") from None
        return cls(node_types, rels, bool(data.get("allow_self_loops", False)))

    def to_dict(self) -> dict:
        return {
            "node_types": list(self.node_types),
            "relations": [
                {"label": r.label, "src": r.src_type, "dst": r.dst_type}
                for r in self.relations
                if not r.is_inverse
            ],
            "allow_self_loops": self.allow_self_loops,
        }


def load_schema(path: str | Path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return Schema.from_dict(yaml.safe_load(fh))


def save_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(schema.to_dict(), fh, sort_keys=False)


class KnowledgeGraph:
    """Immutable typed multigraph with adjacency and degree indices.

    ``triples`` are validated against the schema: endpoint types must match the
    relation signature, duplicates are rejected and self-loops are rejected
    unless the schema allows them.
    """

    def __init__(self, schema: Schema, nodes: Sequence[NodeRef], triples: Iterable[Triple]):
        self.schema = schema
        self.nodes = tuple(nodes)
        for i, n in enumerate(self.nodes):
            if n.id != i:
                raise GraphError(f"node ids must be dense, got {n.id} at position {i}")
            if n.node_type not in schema.node_types:
                raise GraphError(f"node {n.label!r} has undeclared type {n.node_type!r}")
        self.triples: tuple[Triple, ...] = tuple(Triple(*t) for t in triples)
        self._triple_set = frozenset(self.triples)
        if len(self._triple_set) != len(self.triples):
            dup = next(t for t, c in Counter(self.triples).items() if c > 1)
            raise GraphError(f"duplicate triple {self.describe(dup)}")

        out_adj: dict[int, list[tuple[int, int]]] = defaultdict(list)
        out_deg: Counter = Counter()
        in_deg: Counter = Counter()
        n_nodes, n_rels = len(self.nodes), len(schema.relations)
        for t in self.triples:
            if not (0 <= t.head < n_nodes and 0 <= t.tail < n_nodes and 0 <= t.relation < n_rels):
                raise GraphError(f"triple {t} references unknown ids")
            rel = schema.relations[t.relation]
            if self.nodes[t.head].node_type != rel.src_type or self.nodes[t.tail].node_type != rel.dst_type:
                raise GraphError(f"type mismatch for {self.describe(t)}")
            if t.head == t.tail and not schema.allow_self_loops:
                raise GraphError(f"self-loop {self.describe(t)}")
            out_adj[t.head].append((t.relation, t.tail))
            out_deg[(t.head, t.relation)] += 1
            in_deg[(t.tail, t.relation)] += 1
        self._out_adj = dict(out_adj)
        self._out_deg = out_deg
        self._in_deg = in_deg
        self._label_index = {n.label: n.id for n in self.nodes}

    # ---- lookups -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple) -> bool:
        return Triple(*triple) in self._triple_set

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def node_id(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise GraphError(f"unknown node {label!r}") from None

    def relation_id(self, label: str) -> int:
        return self.schema.relation(label).id

    def node_type(self, node: int) -> str:
        return self.nodes[node].node_type

    def nodes_of_type(self, node_type: str) -> list[int]:
        return [n.id for n in self.nodes if n.node_type == node_type]

    def out_edges(self, node: int) -> list[tuple[int, int]]:
        return self._out_adj.get(node, [])

    def out_degree(self, node: int, relation: int | None = None) -> int:
        if relation is None:
            return len(self._out_adj.get(node, ()))
        return self._out_deg.get((node, relation), 0)

    def in_degree(self, node: int, relation: int) -> int:
        return self._in_deg.get((node, relation), 0)

    def degree_index(self) -> dict[tuple[int, int], int]:
        """(node, relation) -> out-degree."""
        return dict(self._out_deg)

    def in_degree_index(self) -> dict[tuple[int, int], int]:
        return dict(self._in_deg)

    def total_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for h, _, t in self.triples:
            deg[h] += 1
            deg[t] += 1
        return deg

    def triples_of(self, relation: int) -> list[Triple]:
        return [t for t in self.triples if t.relation == relation]

    def inverse_relation(self, relation: int) -> int | None:
        return self.schema.relations[relation].inverse_of

    def describe(self, t: Triple) -> str:
        rel = self.schema.relations[t.relation].label if t.relation < len(self.schema.relations) else t.relation
        h = self.nodes[t.head].label if t.head < len(self.nodes) else t.head
        tl = self.nodes[t.tail].label if t.tail < len(self.nodes) else t.tail
        return f"({h}, {rel}, {tl})"

    # ---- derived graphs ------------------------------------------------
    def with_triples(self, triples: Iterable[Triple], schema: Schema | None = None) -> "KnowledgeGraph":
        return KnowledgeGraph(schema or self.schema, self.nodes, triples)

    def without(self, triples: Iterable[Triple]) -> "KnowledgeGraph":
        """Drop ``triples`` and, when inverses exist, their inverse partners."""
        drop = set()
        for t in triples:
            t = Triple(*t)
            drop.add(t)
            inv = self.inverse_relation(t.relation)
            if inv is not None:
                drop.add(Triple(t.tail, inv, t.head))
        return self.with_triples(t for t in self.triples if t not in drop)

    def label_rows(self) -> list[tuple[str, str, str]]:
        rels = self.schema.relations
        return [(self.nodes[h].label, rels[r].label, self.nodes[t].label) for h, r, t in self.triples]


def load_triples(path: str | Path, schema: Schema) -> KnowledgeGraph:
    """Read a headerless ``head<TAB>relation<TAB>tail`` file.

    Node types are taken from the relation signature; a node label that would
    need two different types is an error.  Ids follow first appearance.
    """
    labels: dict[str, int] = {}
    nodes: list[NodeRef] = []
    triples: list[Triple] = []
    seen: dict[Triple, int] = {}
    rel_by_label = {r.label: r for r in schema.relations}

    def node(label: str, node_type: str, lineno: int) -> int:
        if label in labels:
            nid = labels[label]
            if nodes[nid].node_type != node_type:
                raise GraphError(
                    f"line {lineno}: node {label!r} used as {node_type} but earlier as {nodes[nid].node_type}"
                )
            return nid
        labels[label] = len(nodes)
        nodes.append(NodeRef(len(nodes), label, node_type))
        return labels[label]

    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise GraphError(f"line {lineno}: expected 3 tab-separated columns, got {len(parts)}")
            h, r, t = parts
            if r not in rel_by_label:
                raise GraphError(f"line {lineno}: unknown relation {r!r}")
            rel = rel_by_label[r]
            triple = Triple(node(h, rel.src_type, lineno), rel.id, node(t, rel.dst_type, lineno))
            if triple in seen:
                raise GraphError(f"line {lineno}: duplicate triple {h}\t{r}\t{t} (first at line {seen[triple]})")
            seen[triple] = lineno
            triples.append(triple)
    try:
        return KnowledgeGraph(schema, nodes, triples)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None


def save_triples(kg: KnowledgeGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerows(kg.label_rows())


def align_nodes(kg: KnowledgeGraph, nodes: Sequence[tuple[str, str]]) -> KnowledgeGraph:
    """Renumber nodes to follow ``nodes`` ((label, type) pairs).

    Used to line a re-read graph up with the entity rows of a checkpoint;
    nodes listed but absent from ``kg`` are kept as isolated nodes.
    """
    index = {label: i for i, (label, _) in enumerate(nodes)}
    if len(index) != len(nodes):
        raise GraphError("node list contains duplicate labels")
    for n in kg.nodes:
        if n.label not in index:
            raise GraphError(f"node {n.label!r} is not in the reference node list")
        if nodes[index[n.label]][1] != n.node_type:
            raise GraphError(f"node {n.label!r} changed type")
    refs = [NodeRef(i, label, node_type) for i, (label, node_type) in enumerate(nodes)]
    remap = [index[n.label] for n in kg.nodes]
    return KnowledgeGraph(kg.schema, refs, (Triple(remap[h], r, remap[t]) for h, r, t in kg.triples))


def add_inverse_edges(kg: KnowledgeGraph) -> KnowledgeGraph:
    """Return a graph with an ``_label`` inverse relation for every relation."""
    if kg.schema.has_inverses:
        raise GraphError("graph already contains inverse relations")
    base = kg.schema.relations
    n = len(base)
    forward = [replace(r, inverse_of=n + r.id) for r in base]
    inverse = [
        RelationRef(n + r.id, INVERSE_PREFIX + r.label, r.dst_type, r.src_type, True, r.id) for r in base
    ]
    schema = replace(kg.schema, relations=tuple(forward + inverse))
    triples = list(kg.triples) + [Triple(t.tail, n + t.relation, t.head) for t in kg.triples]
    return KnowledgeGraph(schema, kg.nodes, triples)


@dataclass(frozen=True)
class SplitSet:
    train: tuple[Triple, ...]
    valid: tuple[Triple, ...]
    test: tuple[Triple, ...]
    seed: int
    relation: int = field(default=-1)

    def all(self) -> list[Triple]:
        return [*self.train, *self.valid, *self.test]


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    """Floor for valid/test, remainder to train."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise GraphError(f"split ratios must be three non-negative fractions summing to 1, got {ratios}")
    n_valid = math.floor(ratios[1] * n + 1e-9)
    n_test = math.floor(ratios[2] * n + 1e-9)
    return n - n_valid - n_test, n_valid, n_test


def split_triples(
    kg: KnowledgeGraph, relation: int | str, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0
) -> SplitSet:
    rel = kg.relation_id(relation) if isinstance(relation, str) else relation
    if not 0 <= rel < len(kg.schema.relations):
        raise GraphError(f"unknown relation id {rel}")
    triples = sorted(kg.triples_of(rel))
    if not triples:
        raise GraphError(f"relation {kg.schema.relations[rel].label!r} has no triples")
    n_train, n_valid, _ = split_sizes(len(triples), ratios)
    order = np.random.default_rng(seed).permutation(len(triples))
    shuffled = [triples[i] for i in order]
    valid = shuffled[:n_valid]
    test = shuffled[n_valid : len(triples) - n_train]
    train = shuffled[len(triples) - n_train :]
    return SplitSet(tuple(sorted(train)), tuple(sorted(valid)), tuple(sorted(test)), seed, rel)


def save_splits(kg: KnowledgeGraph, splits: SplitSet, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in ("train", "valid", "test"):
        save_triples(kg.with_triples(getattr(splits, name)), directory / f"{name}.tsv")


def load_splits(kg: KnowledgeGraph, directory: str | Path, seed: int = -1) -> SplitSet:
    directory = Path(directory)
    parts = {}
    for name in ("train", "valid", "test"):
        rows = []
        with open(directory / f"{name}.tsv", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 3:
                    raise GraphError(f"{name}.tsv line {lineno}: expected 3 columns")
                rows.append(Triple(kg.node_id(cols[0]), kg.relation_id(cols[1]), kg.node_id(cols[2])))
        parts[name] = tuple(rows)
    rels = {t.relation for p in parts.values() for t in p}
    if len(rels) != 1:
        raise GraphError(f"splits must contain exactly one relation, found {len(rels)}")
    return SplitSet(parts["train"], parts["valid"], parts["test"], seed, rels.pop())


def filter_reachable(kg: KnowledgeGraph, triples: Iterable[Triple], max_len: int) -> list[Triple]:
    """Keep triples whose tail is reachable from the head within ``max_len`` hops
    without using the triple's own edge (or its inverse)."""
    if max_len < 1:
        raise GraphError("max_len must be >= 1")
    kept = []
    for t in triples:
        t = Triple(*t)
        banned = {(t.head, t.relation, t.tail)}
        inv = kg.inverse_relation(t.relation)
        if inv is not None:
            banned.add((t.tail, inv, t.head))
        if _reaches(kg, t.head, t.tail, max_len, banned):
            kept.append(t)
    return kept


def _reaches(kg: KnowledgeGraph, src: int, dst: int, max_len: int, banned: set) -> bool:
    seen = {src}
    frontier = deque([(src, 0)])
    while frontier:
        node, depth = frontier.popleft()
        if depth == max_len:
            continue
        for rel, nxt in kg.out_edges(node):
            if (node, rel, nxt) in banned:
                continue
            if nxt == dst:
                return True
            if nxt not in seen:
                seen.add(nxt)
                frontier.append((nxt, depth + 1))
    return False


def moa_net_schema() -> Schema:
    """Drug / protein / biological-process schema with five relations."""
    return Schema.from_dict(
        {
            "node_types": ["Drug", "Protein", "BiologicalProcess"],
            "relations": [
                {"label": "interacts", "src": "Protein", "dst": "Protein"},
                {"label": "participates", "src": "Protein", "dst": "BiologicalProcess"},
                {"label": "downregulates", "src": "Drug", "dst": "Protein"},
                {"label": "upregulates", "src": "Drug", "dst": "Protein"},
                {"label": "induces", "src": "Drug", "dst": "BiologicalProcess"},
            ],
        }
    )
