from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import build_graph
from oracles import reachable_bfs
from rulewalk.graphops import strip_inverses
from rulewalk.kg import (
    GraphError,
    KnowledgeGraph,
    NodeRef,
    Schema,
    Triple,
    add_inverse_edges,
    align_nodes,
    filter_reachable,
    load_schema,
    load_splits,
    load_triples,
    save_schema,
    save_splits,
    save_triples,
    split_sizes,
    split_triples,
)


def write_rows(path, rows):
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")


class TestSchema:
    def test_round_trip(self, moa_schema, tmp_path):
        save_schema(moa_schema, tmp_path / "s.yaml")
        assert load_schema(tmp_path / "s.yaml") == moa_schema

    def test_undeclared_type(self):
        with pytest.raises(GraphError, match="undeclared"):
            Schema.from_dict({"node_types": ["A"], "relations": [{"label": "r", "src": "A", "dst": "B"}]})

    def test_unknown_relation(self, moa_schema):
        with pytest.raises(GraphError, match="unknown relation"):
            moa_schema.relation("binds")


class TestLoadTriples:
    def test_three_rows(self, moa_schema, tmp_path):
        write_rows(tmp_path / "t.tsv", [
            ("d", "upregulates", "p"), ("p", "participates", "b"), ("d", "induces", "b"),
        ])
        kg = load_triples(tmp_path / "t.tsv", moa_schema)
        assert len(kg) == 3
        assert kg.num_nodes == 3
        assert [kg.node_type(i) for i in range(3)] == ["Drug", "Protein", "BiologicalProcess"]
        d = kg.node_id("d")
        assert sorted(kg.out_edges(d)) == sorted(
            [(moa_schema.relation("upregulates").id, kg.node_id("p")), (moa_schema.relation("induces").id, kg.node_id("b"))]
        )

    def test_duplicate_row_names_lines(self, moa_schema, tmp_path):
        write_rows(tmp_path / "t.tsv", [("d", "upregulates", "p"), ("p", "participates", "b"), ("d", "upregulates", "p")])
        with pytest.raises(GraphError, match=r"line 3.*first at line 1"):
            load_triples(tmp_path / "t.tsv", moa_schema)

    def test_malformed_row(self, moa_schema, tmp_path):
        (tmp_path / "t.tsv").write_text("d\tupregulates\tp\nd\tupregulates\n", encoding="utf-8")
        with pytest.raises(GraphError, match="line 2"):
            load_triples(tmp_path / "t.tsv", moa_schema)

    def test_unknown_relation(self, moa_schema, tmp_path):
        write_rows(tmp_path / "t.tsv", [("d", "binds", "p")])
        with pytest.raises(GraphError, match="line 1: unknown relation"):
            load_triples(tmp_path / "t.tsv", moa_schema)

    def test_conflicting_node_type(self, moa_schema, tmp_path):
        write_rows(tmp_path / "t.tsv", [("x", "upregulates", "p"), ("x", "participates", "b")])
        with pytest.raises(GraphError, match="line 2"):
            load_triples(tmp_path / "t.tsv", moa_schema)

    def test_self_loop_rejected(self, moa_schema, tmp_path):
        write_rows(tmp_path / "t.tsv", [("p", "interacts", "p")])
        with pytest.raises(GraphError, match="self-loop"):
            load_triples(tmp_path / "t.tsv", moa_schema)

    def test_row_order_does_not_change_graph(self, toy_graph, tmp_path):
        rows = toy_graph.label_rows()
        write_rows(tmp_path / "a.tsv", rows)
        write_rows(tmp_path / "b.tsv", rows[::-1])
        a = load_triples(tmp_path / "a.tsv", toy_graph.schema)
        b = load_triples(tmp_path / "b.tsv", toy_graph.schema)
        assert set(a.label_rows()) == set(b.label_rows())

    def test_save_load_round_trip(self, toy_graph, tmp_path):
        save_triples(toy_graph, tmp_path / "t.tsv")
        again = load_triples(tmp_path / "t.tsv", toy_graph.schema)
        assert again.label_rows() == toy_graph.label_rows()


class TestIndices:
    def test_out_degree_sums_relations(self, toy_graph):
        index = toy_graph.degree_index()
        for n in range(toy_graph.num_nodes):
            assert toy_graph.out_degree(n) == sum(v for (m, _), v in index.items() if m == n)

    def test_total_degrees(self, toy_graph):
        deg = Counter()
        for h, _, t in toy_graph.triples:
            deg[h] += 1
            deg[t] += 1
        assert toy_graph.total_degrees().tolist() == [deg[n] for n in range(toy_graph.num_nodes)]

    def test_type_mismatch(self, moa_schema):
        nodes = [NodeRef(0, "d", "Drug"), NodeRef(1, "b", "BiologicalProcess")]
        with pytest.raises(GraphError, match="type mismatch"):
            KnowledgeGraph(moa_schema, nodes, [Triple(0, moa_schema.relation("upregulates").id, 1)])


class TestInverses:
    def test_one_triple_becomes_two(self, moa_schema):
        kg = build_graph(moa_schema, [("d", "Drug"), ("b", "BiologicalProcess")], [("d", "induces", "b")])
        inv = add_inverse_edges(kg)
        assert len(inv) == 2
        rel = inv.schema.relation("_induces")
        assert rel.is_inverse and (rel.src_type, rel.dst_type) == ("BiologicalProcess", "Drug")
        assert Triple(1, rel.id, 0) in inv

    def test_involutive(self, toy_graph):
        schema = add_inverse_edges(toy_graph).schema
        for r in schema.relations:
            assert schema.relations[r.inverse_of].inverse_of == r.id
            assert (schema.relations[r.inverse_of].src_type, schema.relations[r.inverse_of].dst_type) == (
                r.dst_type, r.src_type,
            )

    def test_twice_is_error(self, toy_graph):
        with pytest.raises(GraphError):
            add_inverse_edges(add_inverse_edges(toy_graph))

    def test_strip_round_trip(self, toy_graph):
        back = strip_inverses(add_inverse_edges(toy_graph))
        assert Counter(back.triples) == Counter(toy_graph.triples)

    def test_without_drops_inverse_partner(self, toy_graph):
        inv = add_inverse_edges(toy_graph)
        t = Triple(toy_graph.node_id("d0"), inv.relation_id("induces"), toy_graph.node_id("b0"))
        out = inv.without([t])
        assert t not in out
        assert Triple(t.tail, inv.relation_id("_induces"), t.head) not in out
        assert len(out) == len(inv) - 2


class TestSplits:
    @pytest.mark.parametrize("n, expected", [(10, (6, 2, 2)), (1622, (974, 324, 324)), (3, (3, 0, 0))])
    def test_sizes(self, n, expected):
        sizes = split_sizes(n, (0.6, 0.2, 0.2))
        assert sizes == expected
        assert sum(sizes) == n

    def test_bad_ratios(self):
        with pytest.raises(GraphError):
            split_sizes(10, (0.5, 0.2, 0.2))

    def test_partition_and_determinism(self, toy_graph):
        a = split_triples(toy_graph, "induces", (0.6, 0.2, 0.2), seed=3)
        b = split_triples(toy_graph, "induces", (0.6, 0.2, 0.2), seed=3)
        assert a == b
        parts = [set(a.train), set(a.valid), set(a.test)]
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        assert Counter(a.all()) == Counter(toy_graph.triples_of(toy_graph.relation_id("induces")))
        assert (len(a.train), len(a.valid), len(a.test)) == (3, 1, 1)

    def test_absent_relation(self, moa_schema):
        kg = build_graph(moa_schema, [("d", "Drug"), ("p", "Protein")], [("d", "upregulates", "p")])
        with pytest.raises(GraphError, match="no triples"):
            split_triples(kg, "induces")

    def test_save_load(self, toy_graph, tmp_path):
        s = split_triples(toy_graph, "induces", seed=1)
        save_splits(toy_graph, s, tmp_path / "splits")
        back = load_splits(toy_graph, tmp_path / "splits", seed=1)
        assert back == s


class TestFilterReachable:
    def test_path_kept_isolated_removed(self, moa_schema):
        kg = build_graph(
            moa_schema,
            [("d", "Drug"), ("p", "Protein"), ("b", "BiologicalProcess"), ("e", "Drug")],
            [("d", "upregulates", "p"), ("p", "participates", "b"), ("d", "induces", "b"), ("e", "induces", "b")],
        )
        induces = kg.relation_id("induces")
        keep = Triple(kg.node_id("d"), induces, kg.node_id("b"))
        drop = Triple(kg.node_id("e"), induces, kg.node_id("b"))
        assert filter_reachable(kg, [keep, drop], 2) == [keep]
        assert filter_reachable(kg, [keep], 1) == []
        assert filter_reachable(kg, [], 4) == []

    def test_own_inverse_is_excluded(self, moa_schema):
        kg = add_inverse_edges(build_graph(moa_schema, [("d", "Drug"), ("b", "BiologicalProcess")], [("d", "induces", "b")]))
        t = Triple(0, kg.relation_id("induces"), 1)
        assert filter_reachable(kg, [t], 4) == []

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_matches_bfs_oracle(self, seed, max_len):
        rng = np.random.default_rng(seed)
        schema = Schema.from_dict({"node_types": ["N"], "relations": [{"label": "a", "src": "N", "dst": "N"},
                                                                      {"label": "b", "src": "N", "dst": "N"}]})
        n = int(rng.integers(2, 30))
        edges = {(int(h), int(r), int(t)) for h, r, t in zip(rng.integers(0, n, 60), rng.integers(0, 2, 60),
                                                             rng.integers(0, n, 60)) if h != t}
        kg = KnowledgeGraph(schema, [NodeRef(i, f"n{i}", "N") for i in range(n)], sorted(edges))
        adj = {}
        for h, r, t in edges:
            adj.setdefault(h, []).append((r, t))
        candidates = [Triple(*e) for e in sorted(edges)][:15]
        expected = [t for t in candidates if reachable_bfs(adj, t.head, t.tail, max_len, {tuple(t)})]
        got = filter_reachable(kg, candidates, max_len)
        assert got == expected
        assert set(got) <= set(candidates)


def test_align_nodes_follows_reference(toy_graph, tmp_path):
    rows = toy_graph.label_rows()
    write_rows(tmp_path / "rev.tsv", rows[::-1])
    shuffled = load_triples(tmp_path / "rev.tsv", toy_graph.schema)
    aligned = align_nodes(shuffled, [(n.label, n.node_type) for n in toy_graph.nodes])
    assert aligned.nodes == toy_graph.nodes
    assert set(aligned.triples) == set(toy_graph.triples)
