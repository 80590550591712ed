"""Synthetic drug / protein / process graphs with planted rule-conforming mechanisms.

Every planted (drug, process) pair is connected by a private witness path
that follows a planted rule body.  Background edges are added with
preferential attachment, ``P(node) ~ (degree + 1) ** hub_skew``.

Proteins play disjoint roles: drug targets (end of an up/downregulates edge)
never carry ``participates`` edges, so decoy bodies made of a drug-target
step followed directly by ``participates`` cannot occur anywhere in the graph.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .kg import (
    GraphError,
    KnowledgeGraph,
    NodeRef,
    SplitSet,
    Triple,
    add_inverse_edges,
    moa_net_schema,
    save_schema,
    save_triples,
    split_triples,
)
from .rules import MetapathRule, RuleSet, Step, match_path, save_rules

QUERY_RELATION = "induces"


@dataclass
class SynthConfig:
    n_drugs: int = 50
    n_proteins: int = 300
    n_processes: int = 20
    n_planted: int = 60
    planted_rules: list = field(default_factory=lambda: [["upregulates", "interacts", "participates"]])
    decoy_rules: list = field(
        default_factory=lambda: [["downregulates", "participates"], ["upregulates", "participates"]]
    )
    # totals per relation, witness edges included
    n_upregulates: int = 65
    n_downregulates: int = 250
    n_participates: int = 150
    ppi_fraction: float = 0.9  # share of all edges that are `interacts`
    target_pool_fraction: float = 0.5  # share of background proteins that can be drug targets
    effector_pool_fraction: float = 0.25  # share of background proteins that can participate
    hub_skew: float = 1.5
    process_skew: float = 0.0  # popularity skew of planted pairs over processes
    # background participates edges go to the process with the fewest
    # participates edges so far, decoupling mechanistic reach from popularity
    balance_processes: bool = False
    # witness effectors keep their single planted participates edge
    private_effectors: bool = False
    inverse_edges: bool = False
    split_ratios: tuple = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_drugs", "n_proteins", "n_processes", "n_planted"):
            if getattr(self, name) <= 0:
                raise GraphError(f"{name} must be positive")
        if not 0.0 < self.ppi_fraction < 1.0:
            raise GraphError("ppi_fraction must lie in (0, 1)")
        if self.hub_skew < 0 or self.process_skew < 0:
            raise GraphError("skew exponents must be >= 0")
        self.split_ratios = tuple(self.split_ratios)


# named overrides of SynthConfig defaults
PROFILES: dict[str, dict] = {
    "default": {},
    # hub-heavy graph whose answers crowd onto a few popular processes, while
    # every process gets the same participates degree: popularity survives
    # degree-preserving permutation, planted mechanisms do not
    "high_skew": dict(
        hub_skew=2.0, process_skew=4.0, balance_processes=True, private_effectors=True, n_drugs=100,
        n_proteins=700, n_planted=120, effector_pool_fraction=0.5, n_upregulates=160, n_downregulates=300,
        n_participates=2000, ppi_fraction=0.8,
    ),
}


@dataclass
class PlantedTruth:
    pairs: list[tuple[int, int]]
    witnesses: list[list[int]]  # node sequence per pair, drug first
    witness_relations: list[list[int]]
    pair_rule: list[int]  # planted rule id per pair
    planted_rule_ids: list[int]
    decoy_rule_ids: list[int]

    def witness_steps(self, kg: KnowledgeGraph, i: int) -> list[Step]:
        nodes, rels = self.witnesses[i], self.witness_relations[i]
        return [Step(r, kg.node_type(a), kg.node_type(b)) for r, a, b in zip(rels, nodes, nodes[1:])]


def _rule_from_labels(rule_id: int, labels, schema, name: str) -> MetapathRule:
    head = schema.relation(QUERY_RELATION)
    body = tuple(Step(schema.relation(l).id, schema.relation(l).src_type, schema.relation(l).dst_type) for l in labels)
    return MetapathRule(rule_id, Step(head.id, head.src_type, head.dst_type), body, 0.5, name)


def _pa_choice(rng: np.random.Generator, pool: np.ndarray, degree: np.ndarray, skew: float) -> int:
    w = (degree[pool] + 1.0) ** skew
    return int(pool[rng.choice(len(pool), p=w / w.sum())])


def generate_synthetic(config: SynthConfig) -> tuple[KnowledgeGraph, PlantedTruth, SplitSet, RuleSet]:
    schema = moa_net_schema()
    rel = {r.label: r.id for r in schema.relations}
    rng = np.random.default_rng(config.seed)

    planted_rules = [
        _rule_from_labels(i, labels, schema, f"planted_{i}") for i, labels in enumerate(config.planted_rules)
    ]
    decoys = [
        _rule_from_labels(len(planted_rules) + i, labels, schema, f"decoy_{i}")
        for i, labels in enumerate(config.decoy_rules)
    ]
    rules = RuleSet(tuple(planted_rules + decoys), (rel[QUERY_RELATION],))
    for r in planted_rules + decoys:
        if r.body[0].src_type != "Drug" or r.body[-1].dst_type != "BiologicalProcess":
            raise GraphError(f"rule {r.name} must run from Drug to BiologicalProcess")

    drugs = np.arange(config.n_drugs)
    proteins = np.arange(config.n_drugs, config.n_drugs + config.n_proteins)
    processes = np.arange(config.n_drugs + config.n_proteins, config.n_drugs + config.n_proteins + config.n_processes)
    n_nodes = len(drugs) + len(proteins) + len(processes)
    nodes = (
        [NodeRef(int(i), f"drug_{k}", "Drug") for k, i in enumerate(drugs)]
        + [NodeRef(int(i), f"protein_{k}", "Protein") for k, i in enumerate(proteins)]
        + [NodeRef(int(i), f"process_{k}", "BiologicalProcess") for k, i in enumerate(processes)]
    )

    # planted pairs
    pair_count = config.n_drugs * config.n_processes
    if config.n_planted > pair_count:
        raise GraphError(f"cannot plant {config.n_planted} pairs among {pair_count} drug/process combinations")
    pop = (np.arange(config.n_processes) + 1.0) ** (-config.process_skew)
    pop = pop / pop.sum()
    pairs: list[tuple[int, int]] = []
    seen = set()
    while len(pairs) < config.n_planted:
        d = int(rng.choice(drugs))
        b = int(processes[rng.choice(config.n_processes, p=pop)])
        if (d, b) not in seen:
            seen.add((d, b))
            pairs.append((d, b))

    # witness proteins, private to each pair
    pair_rule = [int(rng.integers(len(planted_rules))) for _ in pairs]
    need = sum(len(planted_rules[k].body) - 1 for k in pair_rule)
    if need > config.n_proteins:
        raise GraphError(f"witness paths need {need} proteins but only {config.n_proteins} exist")
    perm = rng.permutation(proteins)
    mechanism, background = perm[:need], perm[need:]
    n_bg_targets = int(round(config.target_pool_fraction * len(background)))
    n_bg_effectors = int(round(config.effector_pool_fraction * len(background)))
    bg_targets = background[:n_bg_targets]
    bg_effectors = background[n_bg_targets : n_bg_targets + n_bg_effectors]

    edges: set[tuple[int, int, int]] = set()
    degree = np.zeros(n_nodes)

    def add(h: int, r: int, t: int) -> bool:
        if h == t or (h, r, t) in edges:
            return False
        edges.add((h, r, t))
        degree[h] += 1
        degree[t] += 1
        return True

    witnesses, witness_rels = [], []
    targets, effectors = [], []
    cursor = 0
    for (d, b), k in zip(pairs, pair_rule):
        body = planted_rules[k].body
        chain = [d] + [int(p) for p in mechanism[cursor : cursor + len(body) - 1]] + [b]
        cursor += len(body) - 1
        for step, u, v in zip(body, chain, chain[1:]):
            add(u, step.relation, v)
        add(d, rel[QUERY_RELATION], b)
        if len(chain) > 2:
            targets.append(chain[1])
            effectors.append(chain[-2])
        witnesses.append(chain)
        witness_rels.append([s.relation for s in body])

    target_pool = np.array(sorted(set(targets) | set(int(p) for p in bg_targets)), dtype=np.int64)
    effector_pool = np.array(sorted(set(effectors) | set(int(p) for p in bg_effectors)), dtype=np.int64)
    if set(target_pool.tolist()) & set(effector_pool.tolist()):
        raise GraphError("drug targets and effectors overlap; use longer planted bodies")

    def count(r: int) -> int:
        return sum(1 for e in edges if e[1] == r)

    def fill(r: int, total: int, heads: np.ndarray, tails: np.ndarray, balance_tails: bool = False):
        if total < count(r):
            raise GraphError(f"{schema.relations[r].label}: target {total} below the {count(r)} witness edges")
        if len(heads) == 0 or len(tails) == 0:
            if total > count(r):
                raise GraphError(f"{schema.relations[r].label}: no eligible endpoints for background edges")
            return
        capacity = len(heads) * len(tails)
        if total > capacity:
            raise GraphError(f"{schema.relations[r].label}: {total} edges exceed capacity {capacity}")
        stalls = 0
        while count_cache[r] < total:
            h = _pa_choice(rng, heads, degree, config.hub_skew)
            if balance_tails:
                load = np.array([tail_load[int(x)] for x in tails])
                t = int(rng.choice(tails[load == load.min()]))
            else:
                t = _pa_choice(rng, tails, degree, config.hub_skew)
            if add(h, r, t):
                count_cache[r] += 1
                if balance_tails:
                    tail_load[t] += 1
                stalls = 0
            else:
                stalls += 1
                if stalls > 10_000:
                    raise GraphError(f"{schema.relations[r].label}: could not place {total} edges")

    count_cache = {r.id: count(r.id) for r in schema.relations}
    fill(rel["upregulates"], config.n_upregulates, drugs, target_pool)
    fill(rel["downregulates"], config.n_downregulates, drugs, target_pool)
    tail_load = {int(b): 0 for b in processes}
    for h, r, t in edges:
        if r == rel["participates"]:
            tail_load[t] += 1
    participants = effector_pool
    if config.private_effectors:
        participants = np.array(sorted(set(effector_pool.tolist()) - set(effectors)), dtype=np.int64)
    fill(rel["participates"], config.n_participates, participants, processes, config.balance_processes)
    non_ppi = len(edges) - count_cache[rel["interacts"]]
    n_interacts = int(round(config.ppi_fraction / (1.0 - config.ppi_fraction) * non_ppi))
    fill(rel["interacts"], max(n_interacts, count_cache[rel["interacts"]]), proteins, proteins)

    order = {r.id: i for i, r in enumerate(schema.relations)}
    triples = [Triple(*e) for e in sorted(edges, key=lambda e: (order[e[1]], e[0], e[2]))]
    kg = KnowledgeGraph(schema, nodes, triples)
    splits = split_triples(kg, QUERY_RELATION, config.split_ratios, config.seed)
    if config.inverse_edges:
        kg = add_inverse_edges(kg)
    truth = PlantedTruth(
        pairs, witnesses, witness_rels, pair_rule, [r.id for r in planted_rules], [r.id for r in decoys]
    )
    for i in range(len(pairs)):
        if match_path(truth.witness_steps(kg, i), rules) != pair_rule[i]:
            raise AssertionError("witness path does not match its planted rule")
    return kg, truth, splits, rules


def write_synthetic(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write triples.tsv, schema.yaml, rules.yaml, truth.json and the splits."""
    from .kg import save_splits

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kg, truth, splits, rules = generate_synthetic(config)
    base = kg
    if kg.schema.has_inverses:
        from .graphops import strip_inverses

        base = strip_inverses(kg)
    paths = {
        "triples": out / "triples.tsv",
        "schema": out / "schema.yaml",
        "rules": out / "rules.yaml",
        "truth": out / "truth.json",
        "splits": out / "splits",
    }
    save_triples(base, paths["triples"])
    save_schema(base.schema, paths["schema"])
    save_rules(rules, base.schema, paths["rules"])
    save_splits(base, splits, paths["splits"])
    label = lambda n: kg.nodes[n].label  # noqa: E731
    rels = kg.schema.relations
    payload = {
        "config": asdict(config),
        "planted_rule_ids": truth.planted_rule_ids,
        "decoy_rule_ids": truth.decoy_rule_ids,
        "pairs": [
            {
                "drug": label(d),
                "process": label(b),
                "rule_id": truth.pair_rule[i],
                "witness": [label(n) for n in truth.witnesses[i]],
                "relations": [rels[r].label for r in truth.witness_relations[i]],
            }
            for i, (d, b) in enumerate(truth.pairs)
        ],
    }
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    return paths
