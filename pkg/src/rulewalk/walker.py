"""Episodic walk environment, reward and REINFORCE trainer."""
from __future__ import annotations

import copy
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

from .kg import KnowledgeGraph, SplitSet, Triple
from .nnpolicy import (
    Decision,
    PolicyConfig,
    WalkerPolicy,
    clip_and_step,
    make_optimizer,
    reinforce_loss,
    score_actions,
    step_history,
)
from .rules import NO_OP, Metapath, RuleSet, Step, match_path
from .ruleweights import WeightTable, naive_batch_update, p2h_batch_update

log = logging.getLogger(__name__)

UPDATE_MODES = ("none", "naive", "p2h")
TRAIN_PHASE, VALID_PHASE, TEST_PHASE = 0, 1, 2


@dataclass(frozen=True)
class Query:
    source: int
    relation: int
    answers: frozenset
    target: int | None = None  # evaluated answer, for ranking


@dataclass
class Trajectory:
    query: Query
    transitions: list[tuple[int, int]]  # (relation or NO_OP, entity)
    decisions: list[Decision]
    log_prob: float
    metapath: Metapath = ()
    rule_id: int | None = None
    reward: float = 0.0

    @property
    def source(self) -> int:
        return self.query.source

    @property
    def query_relation(self) -> int:
        return self.query.relation

    @property
    def terminal(self) -> int:
        return self.transitions[-1][1]

    @property
    def success(self) -> bool:
        return self.terminal in self.query.answers


@dataclass
class TrainConfig:
    path_length: int = 4
    lam: float = 10.0
    alpha: float = 0.001
    learning_rate: float = 1e-4
    embedding_size: int = 256
    hidden_size: int = 256
    lstm_layers: int = 2
    max_branching: int = 150
    use_entity_embeddings: bool = True
    train_entity_embeddings: bool = True
    batch_size: int = 128
    rollouts: int = 100
    test_rollouts: int = 50
    gamma: float = 1.0
    gamma_baseline: float = 0.05
    beta: float = 0.025
    positive_reward: float = 1.0
    negative_reward: float = 0.0
    update_mode: str = "p2h"
    p2h_normalized: bool = False
    max_epochs: int = 30
    patience: int = 5
    grad_clip: float = 5.0
    filtered: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.gamma_baseline <= 1.0:
            raise ValueError("gamma_baseline must lie in [0, 1]")
        if self.update_mode not in UPDATE_MODES:
            raise ValueError(f"update_mode must be one of {UPDATE_MODES}")
        if self.gamma != 1.0:
            raise ValueError("only undiscounted terminal reward (gamma = 1) is supported")
        for name in ("path_length", "batch_size", "rollouts", "test_rollouts", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def policy_config(self) -> PolicyConfig:
        return PolicyConfig(
            self.embedding_size, self.hidden_size, self.lstm_layers, self.max_branching, self.seed,
            self.use_entity_embeddings, self.train_entity_embeddings,
        )

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class WalkEnv:
    """Action tables over a walking graph.

    Column 0 of every row is NO_OP (stay); nodes with more than
    ``max_branching`` out-edges get a per-episode uniform subsample.
    """

    def __init__(self, kg: KnowledgeGraph, max_branching: int = 150):
        self.kg = kg
        self.max_branching = max_branching
        self.noop = len(kg.schema.relations)
        n = kg.num_nodes
        edges = [kg.out_edges(v) for v in range(n)]
        max_deg = max((len(e) for e in edges), default=0)
        self.width = 1 + min(max_deg, max_branching)
        self.node_rel = np.full((n, self.width), self.noop, dtype=np.int64)
        self.node_ent = np.tile(np.arange(n, dtype=np.int64)[:, None], (1, self.width))
        self.node_valid = np.zeros((n, self.width), dtype=bool)
        self.node_valid[:, 0] = True
        self.overflow: dict[int, np.ndarray] = {}
        for v, out in enumerate(edges):
            if not out:
                continue
            arr = np.asarray(out, dtype=np.int64)
            if len(out) > max_branching:
                self.overflow[v] = arr
                continue
            self.node_rel[v, 1 : 1 + len(out)] = arr[:, 0]
            self.node_ent[v, 1 : 1 + len(out)] = arr[:, 1]
            self.node_valid[v, 1 : 1 + len(out)] = True
        self.node_types = [kg.node_type(v) for v in range(n)]

    def candidates(self, current: np.ndarray, queries: Sequence[Query], rngs: Sequence[np.random.Generator]):
        rel = self.node_rel[current].copy()
        ent = self.node_ent[current].copy()
        valid = self.node_valid[current].copy()
        for i, v in enumerate(current):
            v = int(v)
            if v in self.overflow:
                arr = self.overflow[v]
                pick = np.sort(rngs[i].choice(len(arr), size=self.max_branching, replace=False))
                rel[i, 1:] = arr[pick, 0]
                ent[i, 1:] = arr[pick, 1]
                valid[i, 1:] = True
            q = queries[i]
            if v == q.source:
                hit = (rel[i] == q.relation) & np.isin(ent[i], list(q.answers))
                valid[i] &= ~hit
            elif v in q.answers:
                inv = self.kg.inverse_relation(q.relation)
                if inv is not None:
                    valid[i] &= ~((rel[i] == inv) & (ent[i] == q.source))
        return rel, ent, valid

    def step_of(self, rel: int, src: int, dst: int) -> Step:
        if rel == self.noop:
            return Step(NO_OP, self.node_types[src], self.node_types[dst])
        return Step(rel, self.node_types[src], self.node_types[dst])


def episode_rng(seed: int, phase: int, epoch: int, query_index: int, rollout: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(phase, epoch, query_index, rollout)))


def _sample(probs: np.ndarray, u: float) -> int:
    cdf = np.cumsum(probs)
    return int(min(np.searchsorted(cdf, u * cdf[-1], side="right"), len(probs) - 1))


@torch.no_grad()
def rollout_batch(
    env: WalkEnv,
    policy: WalkerPolicy,
    queries: Sequence[Query],
    path_length: int,
    rollouts: int,
    seed: int,
    phase: int = TRAIN_PHASE,
    epoch: int = 0,
    query_ids: Sequence[int] | None = None,
    rules: RuleSet | None = None,
) -> list[Trajectory]:
    """Sample ``rollouts`` walks of exactly ``path_length`` steps per query.

    Walks for query ``k`` occupy positions ``k * rollouts ... (k + 1) * rollouts - 1``.
    """
    if query_ids is None:
        query_ids = range(len(queries))
    ep_queries = [q for q in queries for _ in range(rollouts)]
    rngs = [episode_rng(seed, phase, epoch, qi, r) for qi in query_ids for r in range(rollouts)]
    uniforms = np.array([g.random(path_length) for g in rngs]) if rngs else np.zeros((0, path_length))
    n = len(ep_queries)
    if n == 0:
        return []
    state = policy.initial_state([q.source for q in ep_queries], [q.relation for q in ep_queries], path_length)
    current = np.array([q.source for q in ep_queries], dtype=np.int64)
    transitions = [[] for _ in range(n)]
    decisions = [[] for _ in range(n)]
    log_prob = np.zeros(n)
    for t in range(path_length):
        rel, ent, valid = env.candidates(current, ep_queries, rngs)
        dist = score_actions(policy, state, rel, ent, valid)
        probs = dist.probs.double().numpy()
        chosen = np.array([_sample(probs[i], uniforms[i, t]) for i in range(n)])
        rows = np.arange(n)
        log_prob += dist.log_probs.double().numpy()[rows, chosen]
        for i in range(n):
            k = chosen[i]
            decisions[i].append(Decision(rel[i], ent[i], valid[i], int(k)))
            transitions[i].append((int(rel[i, k]), int(ent[i, k])))
        taken_rel, taken_ent = rel[rows, chosen], ent[rows, chosen]
        state = step_history(policy, state, taken_rel, taken_ent)
        current = taken_ent
    trajs = []
    for i, q in enumerate(ep_queries):
        prev = q.source
        steps = []
        for r, e in transitions[i]:
            steps.append(env.step_of(r, prev, e))
            prev = e
        metapath = tuple(s for s in steps if s.relation != NO_OP)
        trans = [(NO_OP if r == env.noop else r, e) for r, e in transitions[i]]
        traj = Trajectory(q, trans, decisions[i], float(log_prob[i]), metapath)
        if rules is not None:
            traj.rule_id = match_path(metapath, rules)
        trajs.append(traj)
    return trajs


def compute_reward(
    traj: Trajectory,
    rules: RuleSet,
    lam: float,
    weights: dict[int, float] | WeightTable | None = None,
    positive_reward: float = 1.0,
    negative_reward: float = 0.0,
) -> float:
    """Terminal reward: base hit plus ``lam * w(rule)`` when the walk matches a rule."""
    if traj.terminal not in traj.query.answers:
        return negative_reward
    rule_id = match_path(traj.metapath, rules)
    if rule_id is None:
        return positive_reward
    if isinstance(weights, WeightTable):
        weights = weights.weights
    w = (weights or rules.initial_weights())[rule_id]
    return positive_reward + lam * w


class EarlyStopping:
    """Stop after ``patience`` consecutive evaluations without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -math.inf
        self.best_index = -1
        self.bad = 0
        self.count = 0

    def update(self, value: float) -> bool:
        """Record ``value``; returns True when this evaluation is a new best."""
        self.count += 1
        if value > self.best:
            self.best, self.best_index, self.bad = value, self.count - 1, 0
            return True
        self.bad += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad >= self.patience


def update_baseline(baseline: float, rewards: Sequence[float], gamma_baseline: float) -> float:
    return gamma_baseline * baseline + (1.0 - gamma_baseline) * float(np.mean(rewards))


def group_queries(triples: Iterable[Triple], answer_triples: Iterable[Triple] | None = None) -> list[Query]:
    """One query per (source, relation); answers come from ``answer_triples``
    (defaults to ``triples``)."""
    triples = list(triples)
    answers: dict[tuple[int, int], set] = defaultdict(set)
    for h, r, t in answer_triples if answer_triples is not None else triples:
        answers[(h, r)].add(t)
    keys = sorted({(h, r) for h, r, _ in triples})
    return [Query(h, r, frozenset(answers[(h, r)])) for h, r in keys]


def walk_graph(kg: KnowledgeGraph, splits: SplitSet) -> KnowledgeGraph:
    """The graph the agent walks on: held-out query triples (and inverses) removed."""
    return kg.without([*splits.valid, *splits.test])


@dataclass
class EpochLog:
    epoch: int
    loss: float
    mean_reward: float
    hit_rate: float
    rule_hit_rate: float
    baseline: float
    valid_mrr: float
    weights: dict[int, float]
    valid_metrics: dict = field(default_factory=dict)


@dataclass
class TrainResult:
    policy: WalkerPolicy
    weights: WeightTable
    best_epoch: int
    best_valid_mrr: float
    history: list[EpochLog] = field(default_factory=list)
    final_weights: WeightTable | None = None
    final_policy: WalkerPolicy | None = None


def train(
    kg: KnowledgeGraph,
    splits: SplitSet,
    rules: RuleSet,
    config: TrainConfig,
    trajectory_sink: Callable[[int, Trajectory], None] | None = None,
    evaluate: Callable[[WalkerPolicy, int], object] | None = None,
) -> TrainResult:
    """Train a walker with rule-shaped rewards and online rule-weight updates.

    ``kg`` is the full graph; validation and test query triples are removed
    before walking.  ``evaluate(policy, epoch)`` overrides the default
    per-epoch validation MRR.
    """
    from .evalkit import compute_metrics, rank_queries

    graph = walk_graph(kg, splits)
    env = WalkEnv(graph, config.max_branching)
    torch.manual_seed(config.seed)
    policy = WalkerPolicy(kg.num_nodes, len(kg.schema.relations), config.policy_config())
    optimizer = make_optimizer(policy, config.learning_rate)
    table = WeightTable.for_rules(rules, config.alpha)
    train_queries = group_queries(splits.train)
    known = [*splits.train, *splits.valid, *splits.test]

    if evaluate is None:
        def evaluate(pol, epoch):
            preds = rank_queries(
                pol, env, splits.valid, known, config.test_rollouts, config.path_length,
                seed=config.seed, phase=VALID_PHASE, epoch=epoch, rules=rules, filtered=config.filtered,
            )
            return compute_metrics(preds)

    stopper = EarlyStopping(config.patience)
    baseline = 0.0
    best_state = (copy.deepcopy(policy.state_dict()), table.copy())
    history: list[EpochLog] = []
    for epoch in range(config.max_epochs):
        order = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(9, epoch))).permutation(
            len(train_queries)
        )
        losses, rewards_all, hits, rule_hits = [], [], 0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = [train_queries[i] for i in idx]
            trajs = rollout_batch(
                env, policy, batch, config.path_length, config.rollouts, config.seed,
                TRAIN_PHASE, epoch, query_ids=[int(i) for i in idx], rules=rules,
            )
            rewards = [
                compute_reward(t, rules, config.lam, table, config.positive_reward, config.negative_reward)
                for t in trajs
            ]
            for t, r in zip(trajs, rewards):
                t.reward = r
            advantages = [r - baseline for r in rewards]
            optimizer.zero_grad()
            loss = reinforce_loss(policy, trajs, advantages, config.beta, mean=True)
            if not bool(torch.isfinite(loss)):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}, baseline {baseline}")
            loss.backward()
            clip_and_step(policy, optimizer, config.grad_clip)
            baseline = update_baseline(baseline, rewards, config.gamma_baseline)

            successes = [t for t in trajs if t.success]
            if config.update_mode == "p2h":
                table, _ = p2h_batch_update(
                    successes, rules, table, len(batch), config.rollouts, config.p2h_normalized
                )
            elif config.update_mode == "naive":
                table, _ = naive_batch_update(
                    [t.rule_id for t in successes], rules, table, len(batch), config.rollouts
                )
            if trajectory_sink is not None:
                for t in successes:
                    trajectory_sink(epoch, t)
            losses.append(float(loss.detach()))
            rewards_all.extend(rewards)
            hits += len(successes)
            rule_hits += sum(1 for t in successes if t.rule_id is not None)

        report = evaluate(policy, epoch)
        valid_mrr = float(getattr(report, "mrr", report))
        valid_metrics = report.as_dict() if hasattr(report, "as_dict") else {"mrr": valid_mrr}
        n_eps = max(len(rewards_all), 1)
        history.append(
            EpochLog(
                epoch, float(np.mean(losses)) if losses else 0.0, float(np.mean(rewards_all)) if rewards_all else 0.0,
                hits / n_eps, rule_hits / n_eps, baseline, valid_mrr, dict(table.weights), valid_metrics,
            )
        )
        log.info("epoch %d loss %.4f hit %.3f valid MRR %.4f", epoch, history[-1].loss, hits / n_eps, valid_mrr)
        if stopper.update(valid_mrr):
            best_state = (copy.deepcopy(policy.state_dict()), table.copy())
        if stopper.should_stop:
            break

    final_policy, final_table = policy, table
    best_policy = WalkerPolicy(kg.num_nodes, len(kg.schema.relations), config.policy_config())
    best_policy.load_state_dict(best_state[0])
    return TrainResult(
        best_policy, best_state[1], stopper.best_index, stopper.best, history, final_table, final_policy
    )
