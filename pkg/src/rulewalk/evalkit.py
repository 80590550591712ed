"""Ranking, Hits@k / MRR (standard and rule-pruned), trajectory analysis and DWPC."""
from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .kg import KnowledgeGraph, Triple
from .nnpolicy import WalkerPolicy
from .rules import Metapath, RuleSet, metapath_signature
from .walker import TEST_PHASE, Query, Trajectory, WalkEnv, group_queries, rollout_batch

HITS_AT = (1, 3, 10)


@dataclass
class Candidate:
    entity: int
    score: float
    count: int = 0
    rule_id: int | None = None

    @property
    def rule_satisfied(self) -> bool:
        return self.rule_id is not None


@dataclass
class RankedPrediction:
    query: Query  # target = evaluated answer
    candidates: list[Candidate]  # filtered, sorted
    rank: int | None  # 1-based; None = never reached

    @property
    def reciprocal_rank(self) -> float:
        return 1.0 / self.rank if self.rank else 0.0

    def answer_candidate(self) -> Candidate | None:
        for c in self.candidates:
            if c.entity == self.query.target:
                return c
        return None


@dataclass
class MetricsReport:
    metric_type: str
    hits: dict[int, float]
    mrr: float
    query_count: int
    retained_count: int = 0
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "metric_type": self.metric_type,
            **{f"hits@{k}": v for k, v in self.hits.items()},
            "mrr": self.mrr,
            "query_count": self.query_count,
            "retained_count": self.retained_count,
            "provenance": self.provenance,
        }


def sort_candidates(cands: Iterable[Candidate]) -> list[Candidate]:
    return sorted(cands, key=lambda c: (-c.score, -c.count, c.entity))


def rank_of(target: int, ranked: Sequence[Candidate]) -> int | None:
    for i, c in enumerate(ranked):
        if c.entity == target:
            return i + 1
    return None


def aggregate_rollouts(trajs: Sequence[Trajectory]) -> list[Candidate]:
    """Sum of path probabilities per terminal entity; remembers the most
    frequent matched rule among walks reaching each candidate."""
    score: dict[int, float] = defaultdict(float)
    count: Counter = Counter()
    rules_seen: dict[int, Counter] = defaultdict(Counter)
    for t in trajs:
        e = t.terminal
        score[e] += math.exp(t.log_prob)
        count[e] += 1
        if t.rule_id is not None:
            rules_seen[e][t.rule_id] += 1
    cands = []
    for e in score:
        rule_id = None
        if rules_seen[e]:
            rule_id = min(rules_seen[e].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        cands.append(Candidate(e, score[e], count[e], rule_id))
    return sort_candidates(cands)


def rank_candidates(
    query: Query, target: int, candidates: Sequence[Candidate], filtered: bool = True
) -> RankedPrediction:
    if filtered:
        candidates = [c for c in candidates if c.entity == target or c.entity not in query.answers]
    candidates = sort_candidates(candidates)
    return RankedPrediction(
        Query(query.source, query.relation, query.answers, target), candidates, rank_of(target, candidates)
    )


def rank_queries(
    policy: WalkerPolicy,
    env: WalkEnv,
    test_triples: Sequence[Triple],
    known_triples: Sequence[Triple],
    test_rollouts: int = 50,
    path_length: int = 4,
    seed: int = 0,
    phase: int = TEST_PHASE,
    epoch: int = 0,
    rules: RuleSet | None = None,
    filtered: bool = True,
    trajectories: list | None = None,
) -> list[RankedPrediction]:
    """Rank every evaluated triple's tail among the walk terminals.

    Walks are sampled once per (source, relation); ``known_triples`` supply the
    answer set used for masking and for filtering.
    """
    queries = group_queries(test_triples, known_triples)
    targets: dict[tuple[int, int], list[int]] = defaultdict(list)
    for h, r, t in test_triples:
        targets[(h, r)].append(t)
    trajs = rollout_batch(env, policy, queries, path_length, test_rollouts, seed, phase, epoch, rules=rules)
    if trajectories is not None:
        trajectories.extend(trajs)
    preds = []
    for k, q in enumerate(queries):
        cands = aggregate_rollouts(trajs[k * test_rollouts : (k + 1) * test_rollouts])
        for target in sorted(targets[(q.source, q.relation)]):
            preds.append(rank_candidates(q, target, cands, filtered))
    return preds


def sample_triples(triples: Sequence[Triple], n: int, seed: int = 0) -> list[Triple]:
    """Seeded subset of ``n`` evaluation triples (all of them when ``n`` is larger)."""
    if n <= 0:
        raise ValueError("sample size must be positive")
    triples = sorted(triples)
    if n >= len(triples):
        return triples
    idx = np.random.default_rng(seed).choice(len(triples), size=n, replace=False)
    return [triples[i] for i in sorted(idx)]


def _report(metric_type: str, ranks: Sequence[int | None], retained: int, provenance: dict) -> MetricsReport:
    n = len(ranks)
    if n == 0:
        return MetricsReport(metric_type, {k: 0.0 for k in HITS_AT}, 0.0, 0, 0, provenance)
    hits = {k: sum(1 for r in ranks if r is not None and r <= k) / n for k in HITS_AT}
    mrr = sum(1.0 / r for r in ranks if r) / n
    return MetricsReport(metric_type, hits, mrr, n, retained, provenance)


def compute_metrics(predictions: Sequence[RankedPrediction]) -> MetricsReport:
    ranks = [p.rank for p in predictions]
    provenance = {
        "reached": sum(1 for r in ranks if r is not None),
        "answer_rule_satisfied": sum(
            1 for p in predictions if (c := p.answer_candidate()) is not None and c.rule_satisfied
        ),
    }
    return _report("standard", ranks, sum(1 for r in ranks if r is not None), provenance)


def prune_prediction(pred: RankedPrediction) -> RankedPrediction:
    kept = [c for c in pred.candidates if c.rule_satisfied]
    return RankedPrediction(pred.query, kept, rank_of(pred.query.target, kept))


def pruned_metrics(predictions: Sequence[RankedPrediction], rules: RuleSet | None = None) -> MetricsReport:
    """Metrics over rule-satisfying candidates only.

    Queries whose answer is not rule-satisfying score zero but stay in the
    denominator.  ``rules`` is accepted for symmetry; satisfaction flags are
    read from the predictions.
    """
    pruned = [prune_prediction(p) for p in predictions]
    ranks = [p.rank for p in pruned]
    retained = sum(1 for r in ranks if r is not None)
    provenance = {"rule_satisfied_candidates": sum(len(p.candidates) for p in pruned)}
    return _report("pruned", ranks, retained, provenance)


def classify_trajectories(trajs: Iterable, kg: KnowledgeGraph) -> dict[str, dict]:
    """Histogram of NO_OP-stripped metapath signatures.

    Each entry carries its count and whether it uses an inverse relation
    (an associative pattern).
    """
    hist: dict[str, dict] = {}
    rels = kg.schema.relations
    for t in trajs:
        metapath = getattr(t, "metapath", t)
        sig = metapath_signature(metapath, kg.schema)
        entry = hist.setdefault(
            sig, {"count": 0, "associative": any(rels[s.relation].is_inverse for s in metapath), "length": len(metapath)}
        )
        entry["count"] += 1
    return dict(sorted(hist.items(), key=lambda kv: (-kv[1]["count"], kv[0])))


# ---- degree-weighted path count ----------------------------------------

def dwpc(kg: KnowledgeGraph, source: int, target: int, metapath: Metapath, damping: float = 0.4) -> float:
    """Sum over simple paths conforming to ``metapath`` of
    ``prod_edges(out_deg(u, r) * in_deg(v, r)) ** -damping``."""
    if damping < 0:
        raise ValueError("damping must be >= 0")
    if not metapath:
        return 0.0
    if kg.node_type(source) != metapath[0].src_type or kg.node_type(target) != metapath[-1].dst_type:
        raise ValueError("metapath endpoints do not match the pair's node types")
    total = 0.0
    last = len(metapath) - 1

    def walk(node: int, depth: int, visited: set, weight: float):
        nonlocal total
        rel = metapath[depth].relation
        for r, nxt in kg.out_edges(node):
            if r != rel or nxt in visited:
                continue
            if depth == last and nxt != target:
                continue
            if depth < last and nxt == target:
                continue
            w = weight * float(kg.out_degree(node, r) * kg.in_degree(nxt, r)) ** (-damping)
            if depth == last:
                total += w
            else:
                visited.add(nxt)
                walk(nxt, depth + 1, visited, w)
                visited.discard(nxt)

    walk(source, 0, {source}, 1.0)
    return total


def dwpc_rank(
    kg: KnowledgeGraph, pairs: Sequence[tuple[int, int]], metapaths: Sequence[Metapath], damping: float = 0.4
) -> list[tuple[int, int, float]]:
    """Score pairs by summed DWPC over metapaths, highest first (ties by ids)."""
    scored = [(s, t, sum(dwpc(kg, s, t, mp, damping) for mp in metapaths)) for s, t in pairs]
    return sorted(scored, key=lambda x: (-x[2], x[0], x[1]))


def dwpc_predictions(
    kg: KnowledgeGraph,
    test_triples: Sequence[Triple],
    known_triples: Sequence[Triple],
    metapaths: Sequence[Metapath],
    damping: float = 0.4,
    filtered: bool = True,
) -> list[RankedPrediction]:
    """Rank every node of the target type for each test source by DWPC.

    Candidates with a positive score count as rule-satisfied (metapath id as
    rule id), so both standard and pruned metrics apply.
    """
    queries = group_queries(test_triples, known_triples)
    targets: dict[tuple[int, int], list[int]] = defaultdict(list)
    for h, r, t in test_triples:
        targets[(h, r)].append(t)
    preds = []
    for q in queries:
        dst_type = kg.schema.relations[q.relation].dst_type
        cands = []
        for node in kg.nodes_of_type(dst_type):
            per_mp = [dwpc(kg, q.source, node, mp, damping) for mp in metapaths]
            score = sum(per_mp)
            if score > 0:
                best = int(np.argmax(per_mp))
                cands.append(Candidate(node, score, 1, best))
        for target in sorted(targets[(q.source, q.relation)]):
            preds.append(rank_candidates(q, target, cands, filtered))
    return preds
