"""Metapaths, metapath-based rules and two-hop fragments."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import yaml

from .kg import GraphError, Schema

NO_OP = -1  # stay-in-place step; never part of a metapath
DEFAULT_WEIGHT = 0.5


class Step(NamedTuple):
    relation: int
    src_type: str
    dst_type: str


Metapath = tuple[Step, ...]
Fragment = tuple[Step, Step]


def is_chained(steps: Sequence[Step]) -> bool:
    return len(steps) >= 1 and all(a.dst_type == b.src_type for a, b in zip(steps, steps[1:]))


def strip_noops(steps: Iterable[Step]) -> Metapath:
    return tuple(Step(*s) for s in steps if s[0] != NO_OP)


@dataclass(frozen=True)
class MetapathRule:
    id: int
    head: Step
    body: Metapath
    weight: float = DEFAULT_WEIGHT
    name: str = ""

    def __post_init__(self):
        if not is_chained(self.body):
            raise GraphError(f"rule {self.id}: body steps do not chain")
        if self.body[0].src_type != self.head.src_type or self.body[-1].dst_type != self.head.dst_type:
            raise GraphError(f"rule {self.id}: body endpoints do not match head types")
        if not 0.0 <= self.weight <= 1.0:
            raise GraphError(f"rule {self.id}: weight {self.weight} outside [0, 1]")


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[MetapathRule, ...]
    blocklist: tuple[int, ...] = ()
    _by_body: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise GraphError("rule ids must be unique")
        by_body = {}
        for r in self.rules:
            if r.body in by_body:
                raise GraphError(f"rules {by_body[r.body]} and {r.id} have identical bodies")
            by_body[r.body] = r.id
        object.__setattr__(self, "_by_body", by_body)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    @property
    def num_rules(self) -> int:
        return len(self.rules)

    @property
    def ids(self) -> list[int]:
        return [r.id for r in self.rules]

    def rule(self, rule_id: int) -> MetapathRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    def lookup(self, metapath: Metapath) -> int | None:
        return self._by_body.get(metapath)

    @property
    def fragment_universe(self) -> frozenset:
        return frozenset(f for r in self.rules for f in extract_fragments(r.body))

    def initial_weights(self) -> dict[int, float]:
        return {r.id: r.weight for r in self.rules}

    def with_weights(self, weights: dict[int, float]) -> "RuleSet":
        return RuleSet(tuple(replace(r, weight=weights.get(r.id, r.weight)) for r in self.rules), self.blocklist)


def extract_fragments(body: Sequence[Step]) -> list[Fragment]:
    """Consecutive step pairs, in order and with multiplicity."""
    body = tuple(Step(*s) for s in body)
    return [(a, b) for a, b in zip(body, body[1:])]


def match_path(path: Sequence[Step], rules: RuleSet) -> int | None:
    """Id of the rule whose body equals the NO_OP-stripped path, else ``None``."""
    return rules.lookup(strip_noops(path))


def enumerate_metapaths(
    schema: Schema,
    src_type: str,
    dst_type: str,
    max_len: int,
    blocklist: Iterable[int | str] = (),
    forward_only: bool = True,
) -> list[Metapath]:
    """All chained relation sequences from ``src_type`` to ``dst_type``.

    Ordered by length, then lexicographically by relation ids.  Relations in
    ``blocklist`` (ids or labels) are never used; ``forward_only`` additionally
    skips inverse relations.
    """
    blocked = {schema.relation(b).id if isinstance(b, str) else b for b in blocklist}
    allowed = [
        r for r in schema.relations if r.id not in blocked and not (forward_only and r.is_inverse)
    ]
    found: list[Metapath] = []

    def extend(prefix: list[Step], node_type: str):
        if prefix and node_type == dst_type:
            found.append(tuple(prefix))
        if len(prefix) == max_len:
            return
        for rel in allowed:
            if rel.src_type == node_type:
                prefix.append(Step(rel.id, rel.src_type, rel.dst_type))
                extend(prefix, rel.dst_type)
                prefix.pop()

    if max_len >= 1:
        extend([], src_type)
    found.sort(key=lambda mp: (len(mp), [s.relation for s in mp]))
    return found


def format_metapath(metapath: Sequence[Step], schema: Schema) -> str:
    if not metapath:
        return "(empty)"
    return " -> ".join(f"{schema.relations[s.relation].label}({s.src_type},{s.dst_type})" for s in metapath)


def metapath_signature(metapath: Sequence[Step], schema: Schema) -> str:
    return "|".join(schema.relations[s.relation].label for s in metapath) or "NO_OP"


def rules_from_metapaths(
    metapaths: Sequence[Metapath], head_relation: int, schema: Schema, weight: float = DEFAULT_WEIGHT
) -> RuleSet:
    rel = schema.relations[head_relation]
    head = Step(rel.id, rel.src_type, rel.dst_type)
    return RuleSet(tuple(MetapathRule(i, head, tuple(mp), weight) for i, mp in enumerate(metapaths)))


def _parse_step(raw, schema: Schema, where: str) -> Step:
    if isinstance(raw, str):
        rel = schema.relation(raw)
        return Step(rel.id, rel.src_type, rel.dst_type)
    if isinstance(raw, (list, tuple)) and len(raw) == 3:
        rel = schema.relation(raw[0])
        if (rel.src_type, rel.dst_type) != (raw[1], raw[2]):
            raise GraphError(f"{where}: step {list(raw)} does not match relation signature")
        return Step(rel.id, rel.src_type, rel.dst_type)
    raise GraphError(f"{where}: malformed step {raw!r}")


def rules_from_dict(data: dict, schema: Schema) -> RuleSet:
    rules = []
    for i, entry in enumerate(data.get("rules") or []):
        where = f"rule #{i}"
        try:
            head_rel = schema.relation(entry["head"])
            body = tuple(_parse_step(s, schema, where) for s in entry["body"])
        except KeyError as exc:
            raise GraphError(f"{where}: missing key {exc}") from None
        rules.append(
            MetapathRule(
                int(entry.get("id", i)),
                Step(head_rel.id, head_rel.src_type, head_rel.dst_type),
                body,
                float(entry.get("weight", DEFAULT_WEIGHT)),
                str(entry.get("name", "")),
            )
        )
    blocklist = tuple(schema.relation(b).id for b in data.get("blocklist") or [])
    return RuleSet(tuple(rules), blocklist)


def load_rules(path: str | Path, schema: Schema) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    try:
        return rules_from_dict(data, schema)
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None


def rules_to_dict(rules: RuleSet, schema: Schema) -> dict:
    rels = schema.relations
    return {
        "blocklist": [rels[b].label for b in rules.blocklist],
        "rules": [
            {
                "id": r.id,
                **({"name": r.name} if r.name else {}),
                "head": rels[r.head.relation].label,
                "body": [[rels[s.relation].label, s.src_type, s.dst_type] for s in r.body],
                "weight": r.weight,
            }
            for r in rules
        ],
    }


def save_rules(rules: RuleSet, schema: Schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(rules_to_dict(rules, schema), fh, sort_keys=False)
