"""LSTM walker policy.

Entity and relation embeddings feed a stacked LSTM that encodes the walk so
far.  A two-layer feed-forward scorer maps ``[h_top, current entity, query
relation]`` to a vector that is dotted with each candidate action's
``[relation, entity]`` embedding; masked candidates get probability zero.

All state is batched: tensors carry a leading episode dimension.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn


@dataclass(frozen=True)
class PolicyConfig:
    embedding_size: int = 256
    hidden_size: int = 256
    lstm_layers: int = 2
    max_branching: int = 150
    seed: int = 0
    use_entity_embeddings: bool = True
    train_entity_embeddings: bool = True

    def __post_init__(self):
        for name in ("embedding_size", "hidden_size", "lstm_layers", "max_branching"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be a positive integer")


@dataclass
class AgentState:
    source: torch.Tensor  # [N] entity ids
    query_relation: torch.Tensor  # [N] relation ids
    current: torch.Tensor  # [N] entity ids
    h: list[torch.Tensor]  # per layer [N, H]
    c: list[torch.Tensor]
    step: int
    max_steps: int


@dataclass
class ActionDistribution:
    relations: torch.Tensor  # [N, K]
    entities: torch.Tensor  # [N, K]
    mask: torch.Tensor  # [N, K] bool, True = available
    logits: torch.Tensor
    log_probs: torch.Tensor
    probs: torch.Tensor

    def entropy(self) -> torch.Tensor:
        # masked log-probs are -inf; zero them before the product so backward stays finite
        safe = self.log_probs.masked_fill(~self.mask, 0.0)
        return -(self.probs * safe).sum(dim=-1)


@dataclass
class Decision:
    """Candidates shown at one step and the index chosen."""

    relations: np.ndarray
    entities: np.ndarray
    mask: np.ndarray
    chosen: int


class WalkerPolicy(nn.Module):
    def __init__(self, num_entities: int, num_relations: int, config: PolicyConfig, dtype=torch.float32):
        super().__init__()
        self.config = config
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.noop_relation = num_relations
        self.start_relation = num_relations + 1
        d, hdim = config.embedding_size, config.hidden_size
        rng = np.random.default_rng(config.seed)

        def uniform(*shape, fan_in):
            bound = 1.0 / math.sqrt(fan_in)
            return nn.Parameter(torch.tensor(rng.uniform(-bound, bound, size=shape), dtype=dtype))

        entity = uniform(num_entities, d, fan_in=d)
        if not config.use_entity_embeddings:
            self.register_buffer("entity_embedding", torch.zeros_like(entity.data))
        elif not config.train_entity_embeddings:
            self.register_buffer("entity_embedding", entity.data)
        else:
            self.entity_embedding = entity
        self.relation_embedding = uniform(num_relations + 2, d, fan_in=d)
        self.lstm_w_ih = nn.ParameterList()
        self.lstm_w_hh = nn.ParameterList()
        self.lstm_bias = nn.ParameterList()
        for layer in range(config.lstm_layers):
            in_dim = 2 * d if layer == 0 else hdim
            self.lstm_w_ih.append(uniform(4 * hdim, in_dim, fan_in=in_dim))
            self.lstm_w_hh.append(uniform(4 * hdim, hdim, fan_in=hdim))
            self.lstm_bias.append(uniform(4 * hdim, fan_in=hdim))
        in_dim = hdim + 2 * d
        self.w1 = uniform(hdim, in_dim, fan_in=in_dim)
        self.b1 = uniform(hdim, fan_in=in_dim)
        self.w2 = uniform(2 * d, hdim, fan_in=hdim)
        self.b2 = uniform(2 * d, fan_in=hdim)

    @property
    def dtype(self) -> torch.dtype:
        return self.relation_embedding.dtype

    def action_embedding(self, relations: torch.Tensor, entities: torch.Tensor) -> torch.Tensor:
        return torch.cat([self.relation_embedding[relations], self.entity_embedding[entities]], dim=-1)

    def lstm_step(self, x, h, c):
        new_h, new_c = [], []
        inp = x
        for layer in range(self.config.lstm_layers):
            z = inp @ self.lstm_w_ih[layer].T + h[layer] @ self.lstm_w_hh[layer].T + self.lstm_bias[layer]
            i, f, g, o = z.chunk(4, dim=-1)
            cl = torch.sigmoid(f) * c[layer] + torch.sigmoid(i) * torch.tanh(g)
            hl = torch.sigmoid(o) * torch.tanh(cl)
            new_h.append(hl)
            new_c.append(cl)
            inp = hl
        return new_h, new_c

    def initial_state(self, source, query_relation, max_steps: int) -> AgentState:
        source = torch.as_tensor(source, dtype=torch.long)
        query_relation = torch.as_tensor(query_relation, dtype=torch.long)
        n = source.shape[0]
        zeros = [torch.zeros(n, self.config.hidden_size, dtype=self.dtype) for _ in range(self.config.lstm_layers)]
        start = torch.full((n,), self.start_relation, dtype=torch.long)
        h, c = self.lstm_step(self.action_embedding(start, source), zeros, [z.clone() for z in zeros])
        return AgentState(source, query_relation, source.clone(), h, c, 0, max_steps)

    def logits(self, state: AgentState, relations, entities):
        x = torch.cat(
            [state.h[-1], self.entity_embedding[state.current], self.relation_embedding[state.query_relation]],
            dim=-1,
        )
        hidden = torch.relu(x @ self.w1.T + self.b1)
        out = hidden @ self.w2.T + self.b2  # [N, 2d]
        return (self.action_embedding(relations, entities) * out.unsqueeze(1)).sum(dim=-1)


def score_actions(policy: WalkerPolicy, state: AgentState, relations, entities, mask) -> ActionDistribution:
    relations = torch.as_tensor(relations, dtype=torch.long)
    entities = torch.as_tensor(entities, dtype=torch.long)
    mask = torch.as_tensor(mask, dtype=torch.bool)
    assert bool(mask.any(dim=-1).all()), "every state needs at least one available action"
    logits = policy.logits(state, relations, entities).masked_fill(~mask, float("-inf"))
    log_probs = torch.log_softmax(logits, dim=-1)
    return ActionDistribution(relations, entities, mask, logits, log_probs, log_probs.exp())


def step_history(policy: WalkerPolicy, state: AgentState, relations, entities) -> AgentState:
    if state.step >= state.max_steps:
        raise IndexError(f"walk already has {state.max_steps} steps")
    relations = torch.as_tensor(relations, dtype=torch.long)
    entities = torch.as_tensor(entities, dtype=torch.long)
    h, c = policy.lstm_step(policy.action_embedding(relations, entities), state.h, state.c)
    return AgentState(state.source, state.query_relation, entities, h, c, state.step + 1, state.max_steps)


def _pad(arrays: Sequence[np.ndarray], fill) -> np.ndarray:
    width = max(len(a) for a in arrays)
    out = np.full((len(arrays), width), fill, dtype=np.asarray(arrays[0]).dtype)
    for i, a in enumerate(arrays):
        out[i, : len(a)] = a
    return out


def replay_log_probs(policy: WalkerPolicy, episodes: Sequence) -> tuple[torch.Tensor, torch.Tensor]:
    """Teacher-forced replay of recorded walks.

    ``episodes`` items expose ``source``, ``query_relation`` and ``decisions``
    (a list of :class:`Decision`, all of equal length).  Returns the per-episode
    sums of chosen-action log-probabilities and of step entropies.
    """
    steps = len(episodes[0].decisions)
    state = policy.initial_state([e.source for e in episodes], [e.query_relation for e in episodes], steps)
    logp_sum = torch.zeros(len(episodes), dtype=policy.dtype)
    ent_sum = torch.zeros(len(episodes), dtype=policy.dtype)
    rows = torch.arange(len(episodes))
    for t in range(steps):
        decisions = [e.decisions[t] for e in episodes]
        rel = torch.from_numpy(_pad([d.relations for d in decisions], policy.noop_relation))
        ent = torch.from_numpy(_pad([d.entities for d in decisions], 0))
        mask = torch.from_numpy(_pad([d.mask for d in decisions], False))
        chosen = torch.tensor([d.chosen for d in decisions], dtype=torch.long)
        dist = score_actions(policy, state, rel, ent, mask)
        logp_sum = logp_sum + dist.log_probs[rows, chosen]
        ent_sum = ent_sum + dist.entropy()
        state = step_history(policy, state, rel[rows, chosen], ent[rows, chosen])
    return logp_sum, ent_sum


def reinforce_loss(policy: WalkerPolicy, episodes: Sequence, advantages, beta: float, mean: bool = False):
    """``-sum_i A_i * sum_t log pi - beta * sum_i sum_t H_t`` (or its mean over episodes)."""
    advantages = torch.as_tensor(np.asarray(advantages, dtype=np.float64), dtype=policy.dtype)
    if not bool(torch.isfinite(advantages).all()):
        raise FloatingPointError("non-finite advantage")
    logp, ent = replay_log_probs(policy, episodes)
    loss = -(advantages * logp).sum() - beta * ent.sum()
    return loss / len(episodes) if mean else loss


def policy_gradients(policy: WalkerPolicy, episodes: Sequence[tuple], beta: float) -> dict[str, torch.Tensor]:
    """Gradients of the summed REINFORCE-with-entropy loss.

    ``episodes`` is a sequence of ``(trajectory, advantage)`` pairs.
    """
    trajs = [e for e, _ in episodes]
    loss = reinforce_loss(policy, trajs, [a for _, a in episodes], beta)
    names, params = zip(*policy.named_parameters())
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    out = {}
    for name, p, g in zip(names, params, grads):
        g = torch.zeros_like(p) if g is None else g
        if not bool(torch.isfinite(g).all()):
            raise FloatingPointError(f"non-finite gradient for {name}")
        out[name] = g
    return out


def finite_diff_check(
    policy: WalkerPolicy, episodes: Sequence[tuple], beta: float = 0.0, eps: float = 1e-4, floor: float = 1e-6
) -> float:
    """Max over parameters of ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.

    Runs on a float64 copy with central differences; meant for tiny policies.
    ``floor`` sits above the central-difference rounding noise (about
    ``1e-16 * |loss| / eps``), so near-zero gradient entries are compared in
    absolute terms instead of dividing noise by noise.
    """
    ref = clone_policy(policy, dtype=torch.float64)
    analytic = policy_gradients(ref, episodes, beta)
    trajs = [e for e, _ in episodes]
    advs = [a for _, a in episodes]
    worst = 0.0
    with torch.no_grad():
        for name, p in ref.named_parameters():
            flat = p.view(-1)
            grad = analytic[name].view(-1)
            for k in range(flat.numel()):
                orig = flat[k].item()
                flat[k] = orig + eps
                plus = reinforce_loss(ref, trajs, advs, beta).item()
                flat[k] = orig - eps
                minus = reinforce_loss(ref, trajs, advs, beta).item()
                flat[k] = orig
                numeric = (plus - minus) / (2 * eps)
                a = grad[k].item()
                err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
                worst = max(worst, err)
    return worst


def clone_policy(policy: WalkerPolicy, dtype=None) -> WalkerPolicy:
    dtype = dtype or policy.dtype
    twin = WalkerPolicy(policy.num_entities, policy.num_relations, policy.config, dtype=dtype)
    with torch.no_grad():
        for (_, dst), (_, src) in zip(twin.state_dict().items(), policy.state_dict().items()):
            dst.copy_(src.to(dtype))
    return twin


def make_optimizer(policy: WalkerPolicy, learning_rate: float) -> torch.optim.Adam:
    return torch.optim.Adam(policy.parameters(), lr=learning_rate)


def clip_and_step(policy: WalkerPolicy, optimizer: torch.optim.Optimizer, max_norm: float = 5.0) -> float:
    norm = torch.nn.utils.clip_grad_norm_(policy.parameters(), max_norm)
    if not bool(torch.isfinite(norm)):
        raise FloatingPointError("non-finite gradient norm")
    optimizer.step()
    return float(norm)


def save_checkpoint(policy: WalkerPolicy, path: str | Path, extra: dict | None = None) -> None:
    arrays = {f"param/{k}": v.detach().cpu().numpy() for k, v in policy.state_dict().items()}
    meta = {
        "config": asdict(policy.config),
        "num_entities": policy.num_entities,
        "num_relations": policy.num_relations,
        "dtype": str(policy.dtype).replace("torch.", ""),
        "extra": extra or {},
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path: str | Path) -> tuple[WalkerPolicy, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        dtype = getattr(torch, meta["dtype"])
        policy = WalkerPolicy(meta["num_entities"], meta["num_relations"], PolicyConfig(**meta["config"]), dtype)
        state = {k[len("param/"):]: torch.from_numpy(data[k].copy()) for k in data.files if k.startswith("param/")}
    policy.load_state_dict(state)
    return policy, meta["extra"]
