"""Online rule-weight learning.

Two update schemes share the same bounded multiplicative step:

* naive: each rule's match frequency in a batch, relative to a uniform share
  of all matches;
* two-hop joint probability (P2H): the product, over a rule body's two-hop
  fragments, of each fragment's observed/expected frequency among the
  batch's successful walks.

The resulting ratio is clamped to ``[rho / (B * R), rho * B * R]`` and applied as
``w <- clip(w + w * 2 * alpha * (mu - 1) / (mu + 1), 0, 1)``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .rules import Metapath, RuleSet, extract_fragments


@dataclass
class WeightTable:
    weights: dict[int, float]
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @classmethod
    def for_rules(cls, rules: RuleSet, alpha: float) -> "WeightTable":
        return cls(rules.initial_weights(), alpha)

    def copy(self) -> "WeightTable":
        return WeightTable(dict(self.weights), self.alpha)

    def __getitem__(self, rule_id: int) -> float:
        return self.weights[rule_id]


@dataclass(frozen=True)
class UpdateSignal:
    rule_id: int
    raw: float
    clamped: float


@dataclass
class FragmentCounts:
    observed: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.observed.values())

    @property
    def unique(self) -> int:
        return len(self.observed)

    @property
    def expected(self) -> float:
        return 1.0 / self.unique if self.unique else 0.0

    @classmethod
    def from_metapaths(cls, metapaths: Iterable[Metapath]) -> "FragmentCounts":
        counts: Counter = Counter()
        for mp in metapaths:
            counts.update(extract_fragments(mp))
        return cls(counts)


def mu_bounds(rho: int, batch_size: int, rollouts: int) -> tuple[float, float]:
    if rho <= 0 or batch_size <= 0 or rollouts <= 0:
        raise ValueError("rho, batch_size and rollouts must be positive")
    return rho / (batch_size * rollouts), float(rho * batch_size * rollouts)


def clamp_mu(mu: float, rho: int, batch_size: int, rollouts: int) -> float:
    lo, hi = mu_bounds(rho, batch_size, rollouts)
    return min(max(mu, lo), hi)


def phi(w: float, mu: float, alpha: float) -> float:
    return w * 2.0 * alpha * ((mu - 1.0) / (mu + 1.0))


def phi_update(w: float, mu: float, alpha: float) -> float:
    if mu <= 0:
        raise ValueError("mu must be clamped to a positive value before updating")
    return min(max(w + phi(w, mu, alpha), 0.0), 1.0)


def naive_mu(rule_match_counts: Mapping[int, int], n_rules: int) -> dict[int, float]:
    """Observed/expected match frequency per rule; empty if nothing matched."""
    total = sum(rule_match_counts.values())
    if total == 0:
        return {}
    expected = total / n_rules
    return {rid: count / expected for rid, count in rule_match_counts.items()}


def naive_batch_update(
    matched_rule_ids: Iterable[int | None],
    rules: RuleSet,
    table: WeightTable,
    batch_size: int,
    rollouts: int,
) -> tuple[WeightTable, list[UpdateSignal]]:
    """``matched_rule_ids`` holds one entry per successful walk of the batch."""
    counts = {rid: 0 for rid in rules.ids}
    for rid in matched_rule_ids:
        if rid is not None:
            counts[rid] += 1
    mus = naive_mu(counts, rules.num_rules)
    new = table.copy()
    signals = []
    for rid, mu in mus.items():
        clamped = clamp_mu(mu, rules.num_rules, batch_size, rollouts)
        new.weights[rid] = phi_update(table.weights[rid], clamped, table.alpha)
        signals.append(UpdateSignal(rid, mu, clamped))
    return new, signals


def p2h_scores(metapaths: Sequence[Metapath], rules: RuleSet, normalized: bool = False) -> dict[int, float]:
    """Pre-clamp P2H value per rule; empty when there are no fragments."""
    counts = FragmentCounts.from_metapaths(metapaths)
    if counts.unique == 0:
        return {}
    expected = counts.expected
    total = counts.total
    scores = {}
    for rule in rules:
        value = 1.0
        for frag in extract_fragments(rule.body):
            observed = counts.observed.get(frag, 0)
            if normalized:
                observed = observed / total
            value *= observed / expected
        scores[rule.id] = value
    return scores


def p2h_batch_update(
    successful: Sequence,
    rules: RuleSet,
    table: WeightTable,
    batch_size: int,
    rollouts: int,
    normalized: bool = False,
) -> tuple[WeightTable, list[UpdateSignal]]:
    """One P2H update from a batch's true-pair walks.

    ``successful`` holds metapaths or objects with a ``metapath`` attribute.
    """
    metapaths = [getattr(s, "metapath", s) for s in successful]
    scores = p2h_scores(metapaths, rules, normalized)
    if not scores:
        return table.copy(), []
    # single-step bodies have no fragments; keep the bounds well defined
    rho = max(len(rules.fragment_universe), 1)
    new = table.copy()
    signals = []
    for rid, value in scores.items():
        clamped = clamp_mu(value, rho, batch_size, rollouts)
        new.weights[rid] = phi_update(table.weights[rid], clamped, table.alpha)
        signals.append(UpdateSignal(rid, value, clamped))
    return new, signals
