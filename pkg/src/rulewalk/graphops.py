"""Graph surgery: degree-preserving permutation, degree-targeted trimming and
relation stripping."""
from __future__ import annotations

import hashlib
import heapq
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .kg import GraphError, KnowledgeGraph, RelationRef, Triple


@dataclass
class PermutationReport:
    relations: list[str]
    attempts_factor: float
    attempts: int = 0
    accepted: int = 0
    degree_checksum_before: str = ""
    degree_checksum_after: str = ""
    jaccard: float = 1.0
    per_relation: dict = field(default_factory=dict)

    @property
    def degrees_preserved(self) -> bool:
        return self.degree_checksum_before == self.degree_checksum_after

    def as_dict(self) -> dict:
        return {**asdict(self), "degrees_preserved": self.degrees_preserved}


def degree_signature(kg: KnowledgeGraph) -> list[tuple[int, int, int, int]]:
    """Sorted (node, relation, out-degree, in-degree) rows."""
    out = kg.degree_index()
    inn = kg.in_degree_index()
    keys = sorted(set(out) | set(inn))
    return [(n, r, out.get((n, r), 0), inn.get((n, r), 0)) for n, r in keys]


def degree_checksum(kg: KnowledgeGraph) -> str:
    return hashlib.sha256(json.dumps(degree_signature(kg)).encode()).hexdigest()


def _resolve(kg: KnowledgeGraph, relations: Iterable[int | str]) -> list[RelationRef]:
    out = []
    for r in relations:
        if isinstance(r, str):
            rel = kg.schema.relation(r)
        elif 0 <= r < len(kg.schema.relations):
            rel = kg.schema.relations[r]
        else:
            raise GraphError(f"unknown relation id {r}")
        if rel.is_inverse:
            rel = kg.schema.relations[rel.inverse_of]
        if rel not in out:
            out.append(rel)
    return out


def xswap_permute(
    kg: KnowledgeGraph, relation_classes: Sequence[int | str], attempts_factor: float = 10.0, seed: int = 0
) -> tuple[KnowledgeGraph, PermutationReport]:
    """Randomise edges of each relation class by repeated endpoint swaps.

    ``(a, r, b), (c, r, d) -> (a, r, d), (c, r, b)``; swaps creating self-loops
    or duplicates are rejected.  Inverse edges follow their forward edges.
    """
    if attempts_factor <= 0:
        raise GraphError("attempts_factor must be positive")
    rels = _resolve(kg, relation_classes)
    rng = np.random.default_rng(seed)
    report = PermutationReport([r.label for r in rels], attempts_factor, degree_checksum_before=degree_checksum(kg))
    permuted: dict[int, list[Triple]] = {}
    for rel in rels:
        edges = [(h, t) for h, r, t in kg.triples if r == rel.id]
        if not edges:
            raise GraphError(f"relation class {rel.label!r} has no edges")
        present = set(edges)
        n_attempts = int(round(attempts_factor * len(edges)))
        accepted = 0
        picks = rng.integers(0, len(edges), size=(n_attempts, 2))
        for i, j in picks:
            if i == j:
                continue
            a, b = edges[i]
            c, d = edges[j]
            if not kg.schema.allow_self_loops and (a == d or c == b):
                continue
            if (a, d) in present or (c, b) in present:
                continue
            present.difference_update(((a, b), (c, d)))
            present.update(((a, d), (c, b)))
            edges[i], edges[j] = (a, d), (c, b)
            accepted += 1
        report.attempts += n_attempts
        report.accepted += accepted
        original = {(h, t) for h, r, t in kg.triples if r == rel.id}
        report.per_relation[rel.label] = {
            "edges": len(edges),
            "attempts": n_attempts,
            "accepted": accepted,
            "jaccard": len(original & present) / len(original | present),
        }
        permuted[rel.id] = [Triple(h, rel.id, t) for h, t in edges]
        if rel.inverse_of is not None:
            permuted[rel.inverse_of] = [Triple(t, rel.inverse_of, h) for h, t in edges]

    triples = [t for t in kg.triples if t.relation not in permuted]
    for rid in sorted(permuted):
        triples.extend(permuted[rid])
    out = kg.with_triples(triples)
    report.degree_checksum_after = degree_checksum(out)
    before = {t for t in kg.triples if t.relation in permuted}
    after = {t for t in out.triples if t.relation in permuted}
    report.jaccard = len(before & after) / len(before | after) if before | after else 1.0
    return out, report


def trim_by_degree(kg: KnowledgeGraph, relation: int | str, threshold: int) -> KnowledgeGraph:
    """Remove ``relation`` edges between the highest-degree endpoints until at
    most ``threshold`` remain.

    Degree is the total degree in the current graph, recomputed after each
    removal; ties go to the smallest ``(head, tail)``.  Inverse partners of
    removed edges are removed with them.
    """
    if threshold < 0:
        raise GraphError("threshold must be >= 0")
    (rel,) = _resolve(kg, [relation])
    edges = sorted((h, t) for h, r, t in kg.triples if r == rel.id)
    excess = len(edges) - threshold
    if excess <= 0:
        return kg
    degree = kg.total_degrees()
    per_edge = 2 if rel.inverse_of is not None else 1  # an edge and its inverse touch both ends
    alive = set(edges)
    heap = [(-(degree[h] + degree[t]), h, t) for h, t in edges]
    heapq.heapify(heap)
    removed = set()
    while len(removed) < excess:
        neg, h, t = heapq.heappop(heap)
        if (h, t) not in alive:
            continue
        current = degree[h] + degree[t]
        if -neg != current:
            heapq.heappush(heap, (-current, h, t))
            continue
        alive.discard((h, t))
        removed.add((h, t))
        degree[h] -= per_edge
        degree[t] -= per_edge
    drop = {Triple(h, rel.id, t) for h, t in removed}
    if rel.inverse_of is not None:
        drop |= {Triple(t, rel.inverse_of, h) for h, t in removed}
    return kg.with_triples(t for t in kg.triples if t not in drop)


def strip_relations(kg: KnowledgeGraph, predicate: Callable[[RelationRef], bool]) -> KnowledgeGraph:
    """Drop triples whose relation satisfies ``predicate``; the schema is kept."""
    rels = kg.schema.relations
    return kg.with_triples(t for t in kg.triples if not predicate(rels[t.relation]))


def strip_inverses(kg: KnowledgeGraph) -> KnowledgeGraph:
    return strip_relations(kg, lambda r: r.is_inverse)


def relation_counts(kg: KnowledgeGraph) -> dict[str, int]:
    counts = Counter(t.relation for t in kg.triples)
    return {r.label: counts.get(r.id, 0) for r in kg.schema.relations}
