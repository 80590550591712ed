import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rulewalk.kg import KnowledgeGraph, NodeRef, Triple, moa_net_schema
from rulewalk.rules import RuleSet, Step, enumerate_metapaths, rules_from_metapaths


def step(schema, label: str) -> Step:
    rel = schema.relation(label)
    return Step(rel.id, rel.src_type, rel.dst_type)


def mechanistic_rules(schema, max_len: int = 4) -> RuleSet:
    mps = enumerate_metapaths(schema, "Drug", "BiologicalProcess", max_len, blocklist=["induces"])
    return rules_from_metapaths(mps, schema.relation("induces").id, schema)


def build_graph(schema, typed_nodes, rows) -> KnowledgeGraph:
    """typed_nodes: [(label, type)], rows: [(head_label, relation_label, tail_label)]."""
    nodes = [NodeRef(i, label, t) for i, (label, t) in enumerate(typed_nodes)]
    index = {n.label: n.id for n in nodes}
    triples = [Triple(index[h], schema.relation(r).id, index[t]) for h, r, t in rows]
    return KnowledgeGraph(schema, nodes, triples)


@pytest.fixture
def moa_schema():
    return moa_net_schema()


@pytest.fixture
def moa_rules(moa_schema):
    return mechanistic_rules(moa_schema)


@pytest.fixture
def toy_graph(moa_schema):
    """Two drugs, four proteins, three processes.

    d0 -up-> p0 -interacts-> p1 -participates-> b0 is a planted mechanism;
    d0 also reaches b1 directly through p2.
    """
    nodes = [
        ("d0", "Drug"), ("d1", "Drug"),
        ("p0", "Protein"), ("p1", "Protein"), ("p2", "Protein"), ("p3", "Protein"),
        ("b0", "BiologicalProcess"), ("b1", "BiologicalProcess"), ("b2", "BiologicalProcess"),
    ]
    rows = [
        ("d0", "upregulates", "p0"),
        ("p0", "interacts", "p1"),
        ("p1", "participates", "b0"),
        ("d0", "downregulates", "p2"),
        ("p2", "participates", "b1"),
        ("d1", "upregulates", "p3"),
        ("p3", "participates", "b1"),
        ("p3", "interacts", "p1"),
        ("d0", "induces", "b0"),
        ("d0", "induces", "b1"),
        ("d1", "induces", "b1"),
        ("d1", "induces", "b0"),
        ("d1", "induces", "b2"),
    ]
    return build_graph(moa_schema, nodes, rows)


def random_moa_graph(schema, seed: int, n_drugs=8, n_proteins=20, n_processes=5, n_edges=120) -> KnowledgeGraph:
    """Random simple graph over the MoA schema; duplicates and self-loops skipped."""
    import numpy as np

    rng = np.random.default_rng(seed)
    pools = {"Drug": range(n_drugs), "Protein": range(n_drugs, n_drugs + n_proteins),
             "BiologicalProcess": range(n_drugs + n_proteins, n_drugs + n_proteins + n_processes)}
    nodes = [NodeRef(i, f"{t[0].lower()}{i}", t) for t, pool in pools.items() for i in pool]
    seen = set()
    for _ in range(n_edges):
        rel = schema.relations[int(rng.integers(len(schema.relations)))]
        h = int(rng.choice(list(pools[rel.src_type])))
        t = int(rng.choice(list(pools[rel.dst_type])))
        if h != t:
            seen.add(Triple(h, rel.id, t))
    return KnowledgeGraph(schema, nodes, sorted(seen))


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
