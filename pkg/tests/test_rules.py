import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mechanistic_rules, step
from oracles import metapaths_bruteforce
from rulewalk.kg import GraphError, Schema, add_inverse_edges
from rulewalk.rules import (
    NO_OP,
    MetapathRule,
    RuleSet,
    Step,
    enumerate_metapaths,
    extract_fragments,
    load_rules,
    match_path,
    metapath_signature,
    rules_from_metapaths,
    save_rules,
)


def labels(schema, mp):
    return [schema.relations[s.relation].label for s in mp]


class TestEnumerate:
    def test_mechanistic_table(self, moa_schema):
        mps = enumerate_metapaths(moa_schema, "Drug", "BiologicalProcess", 4, blocklist=["induces"])
        assert [labels(moa_schema, mp) for mp in mps] == [
            ["downregulates", "participates"],
            ["upregulates", "participates"],
            ["downregulates", "interacts", "participates"],
            ["upregulates", "interacts", "participates"],
            ["downregulates", "interacts", "interacts", "participates"],
            ["upregulates", "interacts", "interacts", "participates"],
        ]

    def test_max_len_two(self, moa_schema):
        mps = enumerate_metapaths(moa_schema, "Drug", "BiologicalProcess", 2, blocklist=["induces"])
        assert [labels(moa_schema, mp) for mp in mps] == [
            ["downregulates", "participates"], ["upregulates", "participates"],
        ]

    def test_inverse_edges_excluded_by_default(self, toy_graph):
        schema = add_inverse_edges(toy_graph).schema
        mps = enumerate_metapaths(schema, "Drug", "BiologicalProcess", 4, blocklist=["induces"])
        assert len(mps) == 6
        assert all(not schema.relations[s.relation].is_inverse for mp in mps for s in mp)

    def test_associative_paths_appear_without_constraints(self, toy_graph):
        schema = add_inverse_edges(toy_graph).schema
        mps = enumerate_metapaths(schema, "Drug", "BiologicalProcess", 3, forward_only=False)
        assert ["induces", "_induces", "induces"] in [labels(schema, mp) for mp in mps]

    def test_no_relation_from_source(self):
        schema = Schema.from_dict({"node_types": ["A", "B"], "relations": [{"label": "r", "src": "B", "dst": "A"}]})
        assert enumerate_metapaths(schema, "A", "B", 4) == []

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_matches_product_oracle(self, data):
        types = [f"T{i}" for i in range(data.draw(st.integers(1, 4)))]
        n_rel = data.draw(st.integers(1, 6))
        rels = [
            {"label": f"r{i}", "src": data.draw(st.sampled_from(types)), "dst": data.draw(st.sampled_from(types))}
            for i in range(n_rel)
        ]
        schema = Schema.from_dict({"node_types": types, "relations": rels, "allow_self_loops": True})
        src, dst = data.draw(st.sampled_from(types)), data.draw(st.sampled_from(types))
        max_len = data.draw(st.integers(1, 4))
        got = enumerate_metapaths(schema, src, dst, max_len)
        flat = [(r.id, r.src_type, r.dst_type) for r in schema.relations]
        expected = metapaths_bruteforce(flat, src, dst, max_len)
        assert len(got) == len(expected)
        assert sorted(tuple(tuple(s) for s in mp) for mp in got) == sorted(expected)
        assert got == sorted(got, key=lambda mp: (len(mp), [s.relation for s in mp]))


class TestFragments:
    def test_example_rule(self, moa_schema):
        up, inter, part = (step(moa_schema, x) for x in ("upregulates", "interacts", "participates"))
        assert extract_fragments((up, inter, inter, part)) == [(up, inter), (inter, inter), (inter, part)]

    def test_two_steps(self, moa_schema):
        assert len(extract_fragments((step(moa_schema, "upregulates"), step(moa_schema, "participates")))) == 1

    def test_multiplicity(self, moa_schema):
        inter = step(moa_schema, "interacts")
        assert extract_fragments((inter, inter, inter)) == [(inter, inter), (inter, inter)]

    @given(st.lists(st.sampled_from(["interacts"]), min_size=1, max_size=8))
    def test_length(self, body):
        from rulewalk.kg import moa_net_schema

        schema = moa_net_schema()
        steps = tuple(step(schema, x) for x in body)
        assert len(extract_fragments(steps)) == len(steps) - 1

    def test_universe_size(self, moa_rules):
        assert len(moa_rules.fragment_universe) == 6


class TestMatching:
    def test_mechanism_path(self, moa_schema, moa_rules):
        path = [step(moa_schema, x) for x in ("upregulates", "interacts", "participates")]
        rid = match_path(path, moa_rules)
        assert labels(moa_schema, moa_rules.rule(rid).body) == ["upregulates", "interacts", "participates"]

    def test_noop_steps_are_stripped(self, moa_schema, moa_rules):
        noop = Step(NO_OP, "BiologicalProcess", "BiologicalProcess")
        path = [step(moa_schema, "upregulates"), step(moa_schema, "participates"), noop, noop]
        assert match_path(path, moa_rules) == match_path(path[:2], moa_rules) is not None

    def test_associative_path_does_not_match(self, toy_graph, moa_schema):
        schema = add_inverse_edges(toy_graph).schema
        rules = mechanistic_rules(schema)
        path = [step(schema, "induces"), step(schema, "_induces"), step(schema, "induces")]
        assert match_path(path, rules) is None

    def test_empty_ruleset(self, moa_schema):
        assert match_path([step(moa_schema, "upregulates"), step(moa_schema, "participates")], RuleSet(())) is None

    def test_signature(self, moa_schema):
        assert metapath_signature((), moa_schema) == "NO_OP"
        assert metapath_signature((step(moa_schema, "upregulates"), step(moa_schema, "participates")), moa_schema) == (
            "upregulates|participates"
        )


class TestRuleSet:
    def test_duplicate_bodies_rejected(self, moa_schema):
        head = step(moa_schema, "induces")
        body = (step(moa_schema, "upregulates"), step(moa_schema, "participates"))
        with pytest.raises(GraphError, match="identical bodies"):
            RuleSet((MetapathRule(0, head, body), MetapathRule(1, head, body)))

    def test_unchained_body(self, moa_schema):
        head = step(moa_schema, "induces")
        with pytest.raises(GraphError, match="chain"):
            MetapathRule(0, head, (step(moa_schema, "upregulates"), step(moa_schema, "downregulates")))

    def test_weight_range(self, moa_schema):
        head = step(moa_schema, "induces")
        body = (step(moa_schema, "upregulates"), step(moa_schema, "participates"))
        with pytest.raises(GraphError):
            MetapathRule(0, head, body, weight=1.5)

    def test_yaml_round_trip(self, moa_schema, moa_rules, tmp_path):
        rules = RuleSet(moa_rules.rules, (moa_schema.relation("induces").id,))
        save_rules(rules, moa_schema, tmp_path / "r.yaml")
        assert load_rules(tmp_path / "r.yaml", moa_schema) == rules

    def test_short_form_steps(self, moa_schema, tmp_path):
        (tmp_path / "r.yaml").write_text(
            "rules:\n  - head: induces\n    body: [upregulates, participates]\n", encoding="utf-8"
        )
        rules = load_rules(tmp_path / "r.yaml", moa_schema)
        assert rules.rule(0).body == (step(moa_schema, "upregulates"), step(moa_schema, "participates"))

    def test_bad_step_signature(self, moa_schema, tmp_path):
        (tmp_path / "r.yaml").write_text(
            "rules:\n  - head: induces\n    body: [[upregulates, Protein, Drug]]\n", encoding="utf-8"
        )
        with pytest.raises(GraphError, match="signature"):
            load_rules(tmp_path / "r.yaml", moa_schema)

    def test_from_metapaths(self, moa_schema):
        mps = enumerate_metapaths(moa_schema, "Drug", "BiologicalProcess", 2, blocklist=["induces"])
        rules = rules_from_metapaths(mps, moa_schema.relation("induces").id, moa_schema)
        assert rules.ids == [0, 1]
        assert rules.initial_weights() == {0: 0.5, 1: 0.5}
