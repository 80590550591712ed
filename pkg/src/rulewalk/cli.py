"""Command line entry point.

Every subcommand writes its fully resolved configuration to the output
directory as ``config.yaml``; feeding that file back with ``--config``
reproduces the run.  Exit codes: 0 success, 1 configuration error,
2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import yaml

from .synthgen import PROFILES

log = logging.getLogger("rulewalk")

QUERY_RELATION = "induces"

PRESETS: dict[str, dict[str, Any]] = {
    "mars_p2h": dict(
        lam=10.0, alpha=0.001, learning_rate=1e-4, hidden_size=256, batch_size=128, rollouts=100,
        gamma_baseline=0.05, beta=0.025, update_mode="p2h",
    ),
    "mars_naive": dict(
        lam=5.0, alpha=0.001, learning_rate=1e-4, hidden_size=256, batch_size=256, rollouts=100,
        gamma_baseline=0.5, beta=0.05, update_mode="naive",
    ),
    # rule-free walking: the reward is the hit indicator only
    "minerva": dict(lam=0.0, update_mode="none"),
    # desk-scale settings for the generated benchmark graphs (tens of queries)
    "synthetic": dict(
        lam=10.0, alpha=0.05, learning_rate=3e-3, embedding_size=32, hidden_size=32, batch_size=8,
        rollouts=20, beta=0.05, gamma_baseline=0.05, use_entity_embeddings=False, patience=30,
        update_mode="p2h",
    ),
}


class ConfigError(Exception):
    """Invalid or missing configuration; the message names the key or path."""


@dataclass
class RunConfig:
    triples: str | None = None
    schema: str | None = None
    rules: str | None = None
    splits: str | None = None
    output_dir: str = "run"
    query_relation: str = QUERY_RELATION
    inverse_edges: bool = False
    split_ratios: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    reachable_only: bool = False
    preset: str | None = None
    train: dict = field(default_factory=dict)  # TrainConfig fields

    def train_config(self):
        from .walker import TrainConfig

        return TrainConfig(**self.train)

    def to_dict(self) -> dict:
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "train"}
        data.update(self.train)
        return data


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {value!r}")
        return list(value)
    if default is None or isinstance(default, str):
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    return value


def parse_overrides(items: Sequence[str]) -> dict[str, Any]:
    """``key=value`` pairs; values are parsed as YAML scalars."""
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, raw = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(raw)
    return out


def read_yaml(path: str | Path, what: str = "config") -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what}: file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{what}: cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{what}: {path} must contain a mapping")
    return data


def resolve_config(
    path: str | None = None, preset: str | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Defaults, then preset, then config file, then overrides."""
    from .walker import TrainConfig

    train_defaults = {f.name: f.default for f in fields(TrainConfig)}
    run_defaults = asdict(RunConfig())
    run_defaults.pop("train")
    raw = read_yaml(path) if path else {}
    if overrides:
        raw.update(overrides)
    preset = raw.pop("preset", None) if preset is None else preset
    raw.pop("preset", None)
    merged: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(raw)

    run_kwargs, train_kwargs = {}, dict(train_defaults)
    for key, value in merged.items():
        if key in train_defaults:
            train_kwargs[key] = _coerce(key, value, train_defaults[key])
        elif key in run_defaults:
            run_kwargs[key] = _coerce(key, value, run_defaults[key])
        else:
            raise ConfigError(f"{key}: unknown configuration key")
    cfg = RunConfig(preset=preset, train=train_kwargs, **run_kwargs)
    try:
        cfg.train_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def check_paths(cfg: RunConfig, required: Sequence[str]) -> None:
    for key in required:
        value = getattr(cfg, key)
        if value is None:
            raise ConfigError(f"{key}: required path is not set")
        p = Path(value)
        if key == "splits":
            missing = [n for n in ("train.tsv", "valid.tsv", "test.tsv") if not (p / n).is_file()]
            if not p.is_dir() or missing:
                raise ConfigError(f"{key}: split directory incomplete or missing: {p}")
        elif not p.is_file():
            raise ConfigError(f"{key}: file not found: {p}")
    if cfg.splits is not None and "splits" not in required:
        check_paths(cfg, ["splits"])


def prepare_output(directory: str | Path) -> Path:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output_dir: not writable: {out} ({exc})") from exc
    return out


def write_config(out: Path, data: dict) -> None:
    with open(out / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


# ---- data --------------------------------------------------------------

@dataclass
class RunData:
    kg: Any
    splits: Any
    rules: Any


def load_run_data(cfg: RunConfig, node_order: Sequence[tuple[str, str]] | None = None) -> RunData:
    from .kg import align_nodes, add_inverse_edges, filter_reachable, load_schema, load_splits, load_triples
    from .kg import split_triples, SplitSet
    from .rules import load_rules
    from .walker import walk_graph

    schema = load_schema(cfg.schema)
    kg = load_triples(cfg.triples, schema)
    if node_order is not None:
        kg = align_nodes(kg, node_order)
    if cfg.splits is not None:
        splits = load_splits(kg, cfg.splits, seed=cfg.train["seed"])
    else:
        splits = split_triples(kg, cfg.query_relation, cfg.split_ratios, cfg.train["seed"])
    if cfg.inverse_edges:
        kg = add_inverse_edges(kg)
    rules = load_rules(cfg.rules, kg.schema) if cfg.rules else None
    if rules is None:
        from .rules import RuleSet

        rules = RuleSet(())
    if cfg.reachable_only:
        graph = walk_graph(kg, splits)
        length = cfg.train["path_length"]
        splits = SplitSet(
            splits.train, tuple(filter_reachable(graph, splits.valid, length)),
            tuple(filter_reachable(graph, splits.test, length)), splits.seed, splits.relation,
        )
    return RunData(kg, splits, rules)


# ---- artifacts ---------------------------------------------------------

def write_metrics(out: Path, standard, pruned, cfg_dict: dict, split: str, extra: dict | None = None) -> None:
    payload = {
        "split": split,
        "seed": cfg_dict.get("seed"),
        "standard": standard.as_dict(),
        "pruned": pruned.as_dict(),
        "config": cfg_dict,
        **(extra or {}),
    }
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def write_predictions(out: Path, kg, predictions) -> None:
    rels = kg.schema.relations
    with open(out / "predictions.tsv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["source", "relation", "answer", "candidate", "score", "rank", "rule_satisfied", "rule_id"])
        for p in predictions:
            q = p.query
            for rank, c in enumerate(p.candidates, start=1):
                w.writerow([
                    kg.nodes[q.source].label, rels[q.relation].label, kg.nodes[q.target].label,
                    kg.nodes[c.entity].label, repr(c.score), rank, int(c.rule_satisfied),
                    "" if c.rule_id is None else c.rule_id,
                ])


def format_trajectory(kg, epoch: int, traj) -> str:
    from .rules import NO_OP, metapath_signature

    rels = kg.schema.relations
    steps = ";".join(
        f"{'NO_OP' if r == NO_OP else rels[r].label}:{kg.nodes[e].label}" for r, e in traj.transitions
    )
    return "\t".join([
        str(epoch), kg.nodes[traj.source].label, rels[traj.query_relation].label, steps,
        metapath_signature(traj.metapath, kg.schema), "-" if traj.rule_id is None else str(traj.rule_id),
        repr(float(traj.reward)),
    ])


def evaluate_policy(policy, data: RunData, cfg, split: str, seed: int, sample: int | None = None):
    from .evalkit import compute_metrics, pruned_metrics, rank_queries, sample_triples
    from .walker import TEST_PHASE, VALID_PHASE, WalkEnv, walk_graph

    env = WalkEnv(walk_graph(data.kg, data.splits), cfg.max_branching)
    triples = list(getattr(data.splits, split))
    if sample is not None:
        triples = sample_triples(triples, sample, seed)
    preds = rank_queries(
        policy, env, triples, data.splits.all(), cfg.test_rollouts, cfg.path_length, seed=seed,
        phase=TEST_PHASE if split == "test" else VALID_PHASE, rules=data.rules, filtered=cfg.filtered,
    )
    return preds, compute_metrics(preds), pruned_metrics(preds, data.rules)


# ---- subcommands ---------------------------------------------------------

def cmd_train(args) -> int:
    import torch

    from .nnpolicy import save_checkpoint
    from .walker import train

    cfg = resolve_config(args.config, args.preset, parse_overrides(args.set))
    if args.output:
        cfg.output_dir = args.output
    check_paths(cfg, ["triples", "schema", "rules"])
    out = prepare_output(cfg.output_dir)
    write_config(out, cfg.to_dict())
    tc = cfg.train_config()
    torch.set_num_threads(1)
    data = load_run_data(cfg)

    with open(out / "trajectories.log", "w", encoding="utf-8") as traj_log:
        traj_log.write("epoch\tsource\trelation\ttransitions\tmetapath\trule_id\treward\n")
        result = train(
            data.kg, data.splits, data.rules, tc,
            trajectory_sink=lambda epoch, t: traj_log.write(format_trajectory(data.kg, epoch, t) + "\n"),
        )

    with open(out / "rule_weights.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "rule_id", "weight"])
        for h in result.history:
            for rid in sorted(h.weights):
                w.writerow([h.epoch, rid, repr(h.weights[rid])])
    training = {
        "best_epoch": result.best_epoch,
        "best_valid_mrr": result.best_valid_mrr,
        "epochs": [
            {k: v for k, v in asdict(h).items() if k != "weights"} for h in result.history
        ],
    }
    with open(out / "training.json", "w", encoding="utf-8") as fh:
        json.dump(training, fh, indent=2)
    save_checkpoint(result.policy, out / "checkpoint.npz", extra={
        "rule_weights": {str(k): v for k, v in result.weights.weights.items()},
        "best_epoch": result.best_epoch,
        "nodes": [[n.label, n.node_type] for n in data.kg.nodes],
        "run_config": cfg.to_dict(),
    })
    preds, standard, pruned = evaluate_policy(result.policy, data, tc, "test", tc.seed)
    write_metrics(out, standard, pruned, cfg.to_dict(), "test", {"best_epoch": result.best_epoch})
    write_predictions(out, data.kg, preds)
    print(f"test MRR {standard.mrr:.4f}  pruned MRR {pruned.mrr:.4f}  best epoch {result.best_epoch}")
    return 0


def cmd_evaluate(args) -> int:
    import torch

    from .nnpolicy import load_checkpoint

    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint: file not found: {ckpt}")
    cfg = resolve_config(args.config, args.preset, parse_overrides(args.set))
    if args.output:
        cfg.output_dir = args.output
    check_paths(cfg, ["triples", "schema"])
    out = prepare_output(cfg.output_dir)
    torch.set_num_threads(1)
    policy, extra = load_checkpoint(ckpt)
    resolved = {**cfg.to_dict(), "checkpoint": str(ckpt), "split": args.split, "sample": args.sample}
    write_config(out, resolved)
    data = load_run_data(cfg, node_order=[tuple(n) for n in extra.get("nodes", [])] or None)
    if policy.num_entities != data.kg.num_nodes or policy.num_relations != len(data.kg.schema.relations):
        raise ConfigError("checkpoint: graph size does not match the checkpoint (inverse_edges setting?)")
    tc = cfg.train_config()
    preds, standard, pruned = evaluate_policy(policy, data, tc, args.split, tc.seed, args.sample)
    write_metrics(out, standard, pruned, resolved, args.split)
    write_predictions(out, data.kg, preds)
    print(f"{args.split} MRR {standard.mrr:.4f}  pruned MRR {pruned.mrr:.4f}  queries {standard.query_count}")
    return 0


def _graph_from_args(args):
    from .kg import load_schema, load_triples

    for key in ("triples", "schema"):
        if not Path(getattr(args, key)).is_file():
            raise ConfigError(f"{key}: file not found: {getattr(args, key)}")
    schema = load_schema(args.schema)
    return load_triples(args.triples, schema)


def cmd_permute(args) -> int:
    from .graphops import xswap_permute
    from .kg import save_schema, save_triples

    kg = _graph_from_args(args)
    if args.relations:
        relations = [r.strip() for r in args.relations.split(",") if r.strip()]
    else:
        relations = [r.label for r in kg.schema.relations if not r.is_inverse and r.label != args.keep]
    for r in relations:
        if not kg.schema.has_relation(r):
            raise ConfigError(f"relations: unknown relation {r!r}")
    out = prepare_output(args.output)
    write_config(out, {
        "triples": args.triples, "schema": args.schema, "relations": relations,
        "attempts_factor": args.attempts_factor, "seed": args.seed,
    })
    permuted, report = xswap_permute(kg, relations, args.attempts_factor, args.seed)
    save_triples(permuted, out / "triples.tsv")
    save_schema(permuted.schema, out / "schema.yaml")
    with open(out / "permutation_report.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(report.as_dict(), fh, sort_keys=False)
    print(f"accepted {report.accepted}/{report.attempts} swaps, jaccard {report.jaccard:.3f}, "
          f"degrees preserved: {report.degrees_preserved}")
    return 0


def cmd_trim(args) -> int:
    from .graphops import relation_counts, trim_by_degree
    from .kg import save_schema, save_triples

    kg = _graph_from_args(args)
    if not kg.schema.has_relation(args.relation):
        raise ConfigError(f"relation: unknown relation {args.relation!r}")
    out = prepare_output(args.output)
    write_config(out, {"triples": args.triples, "schema": args.schema, "relation": args.relation,
                       "threshold": args.threshold})
    trimmed = trim_by_degree(kg, args.relation, args.threshold)
    save_triples(trimmed, out / "triples.tsv")
    save_schema(trimmed.schema, out / "schema.yaml")
    report = {"before": relation_counts(kg), "after": relation_counts(trimmed)}
    with open(out / "trim_report.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(report, fh, sort_keys=False)
    print(f"{args.relation}: {report['before'][args.relation]} -> {report['after'][args.relation]} edges")
    return 0


def cmd_enumerate(args) -> int:
    from .kg import load_schema
    from .rules import RuleSet, enumerate_metapaths, format_metapath, rules_from_metapaths, save_rules

    if not Path(args.schema).is_file():
        raise ConfigError(f"schema: file not found: {args.schema}")
    schema = load_schema(args.schema)
    blocklist = []
    for label in args.blocklist:
        if not schema.has_relation(label):
            raise ConfigError(f"blocklist: unknown relation {label!r}")
        blocklist.append(schema.relation(label).id)
    for t in (args.source_type, args.target_type):
        if t not in schema.node_types:
            raise ConfigError(f"node type: unknown type {t!r}")
    metapaths = enumerate_metapaths(schema, args.source_type, args.target_type, args.max_len, blocklist)
    for i, mp in enumerate(metapaths):
        print(f"{i}\t{format_metapath(mp, schema)}")
    if args.output:
        if not schema.has_relation(args.head):
            raise ConfigError(f"head: unknown relation {args.head!r}")
        head = schema.relation(args.head)
        rules = rules_from_metapaths(metapaths, head.id, schema)
        save_rules(RuleSet(rules.rules, tuple(blocklist)), schema, args.output)
    return 0


def cmd_dwpc(args) -> int:
    from .evalkit import compute_metrics, dwpc_predictions, pruned_metrics

    cfg = resolve_config(args.config, None, parse_overrides(args.set))
    if args.output:
        cfg.output_dir = args.output
    check_paths(cfg, ["triples", "schema", "rules"])
    out = prepare_output(cfg.output_dir)
    resolved = {**cfg.to_dict(), "damping": args.damping, "split": args.split}
    write_config(out, resolved)
    data = load_run_data(cfg)
    metapaths = [r.body for r in data.rules]
    graph_kg = data.kg.without([*data.splits.valid, *data.splits.test])
    preds = dwpc_predictions(
        graph_kg, getattr(data.splits, args.split), data.splits.all(), metapaths, args.damping,
        cfg.train["filtered"],
    )
    standard, pruned = compute_metrics(preds), pruned_metrics(preds, data.rules)
    write_metrics(out, standard, pruned, resolved, args.split)
    write_predictions(out, data.kg, preds)
    print(f"DWPC {args.split} MRR {standard.mrr:.4f}  hits@10 {standard.hits[10]:.4f}")
    return 0


def cmd_generate(args) -> int:
    from .synthgen import SynthConfig, write_synthetic

    raw = dict(PROFILES[args.profile])
    raw.update(read_yaml(args.config, "config") if args.config else {})
    raw.update(parse_overrides(args.set))
    if args.seed is not None:
        raw["seed"] = args.seed
    known = {f.name for f in fields(SynthConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown generator key")
    try:
        synth = SynthConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    out = prepare_output(args.output)
    resolved = asdict(synth)
    resolved["split_ratios"] = list(resolved["split_ratios"])
    write_config(out, resolved)
    paths = write_synthetic(synth, out)
    run = {
        "preset": "synthetic",
        "triples": str(paths["triples"]),
        "schema": str(paths["schema"]),
        "rules": str(paths["rules"]),
        "splits": str(paths["splits"]),
        "inverse_edges": synth.inverse_edges,
        "seed": synth.seed,
        "output_dir": str(out / "run"),
    }
    with open(out / "run.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(run, fh, sort_keys=False)
    print(f"wrote synthetic graph to {out}")
    return 0


def cmd_analyze(args) -> int:
    from .evalkit import classify_trajectories
    from .kg import load_schema
    from .rules import Step

    for key in ("log", "schema"):
        if not Path(getattr(args, key)).is_file():
            raise ConfigError(f"{key}: file not found: {getattr(args, key)}")
    schema = load_schema(args.schema)
    if not schema.has_inverses and args.inverse_edges:
        from .kg import KnowledgeGraph, add_inverse_edges

        schema = add_inverse_edges(KnowledgeGraph(schema, [], [])).schema
    metapaths = []
    with open(args.log, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        col = header.index("metapath")
        for line in fh:
            sig = line.rstrip("\n").split("\t")[col]
            steps = []
            if sig != "NO_OP":
                for label in sig.split("|"):
                    rel = schema.relation(label)
                    steps.append(Step(rel.id, rel.src_type, rel.dst_type))
            metapaths.append(tuple(steps))
    from .kg import KnowledgeGraph

    hist = classify_trajectories(metapaths, KnowledgeGraph(schema, [], []))
    payload = {"total": len(metapaths), "histogram": hist}
    if args.output:
        out = prepare_output(args.output)
        write_config(out, {"log": args.log, "schema": args.schema, "inverse_edges": args.inverse_edges})
        with open(out / "trajectory_histogram.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    for sig, entry in list(hist.items())[: args.top]:
        flag = "associative" if entry["associative"] else ""
        print(f"{entry['count']:8d}  {sig}  {flag}")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rulewalk", description="Rule-guided reinforcement-learning walks on typed graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_args(p, with_preset=True):
        p.add_argument("--config", help="YAML run configuration")
        if with_preset:
            p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--output", help="output directory (overrides output_dir)")

    p = sub.add_parser("train", help="train a walker and evaluate it on the test split")
    run_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="rank a split with a saved checkpoint")
    run_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["valid", "test"], default="test")
    p.add_argument("--sample", type=int, help="evaluate a seeded random subset of this many triples")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("permute", help="degree-preserving edge swaps")
    p.add_argument("--triples", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--relations", help="comma-separated relation labels (default: all except --keep)")
    p.add_argument("--keep", default=QUERY_RELATION, help="relation left untouched by default")
    p.add_argument("--attempts-factor", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_permute)

    p = sub.add_parser("trim", help="remove edges between the highest-degree nodes")
    p.add_argument("--triples", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--relation", required=True)
    p.add_argument("--threshold", type=int, required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("enumerate-metapaths", help="list schema metapaths between two node types")
    p.add_argument("--schema", required=True)
    p.add_argument("--source-type", required=True)
    p.add_argument("--target-type", required=True)
    p.add_argument("--max-len", type=int, default=4)
    p.add_argument("--blocklist", nargs="*", default=[QUERY_RELATION])
    p.add_argument("--head", default=QUERY_RELATION)
    p.add_argument("--output", help="write the metapaths as a rules YAML file")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("dwpc", help="degree-weighted path count baseline")
    run_args(p, with_preset=False)
    p.add_argument("--damping", type=float, default=0.4)
    p.add_argument("--split", choices=["valid", "test"], default="test")
    p.set_defaults(func=cmd_dwpc)

    p = sub.add_parser("generate-synthetic", help="write a synthetic graph with planted mechanisms")
    p.add_argument("--profile", choices=sorted(PROFILES), default="default", help="named generator settings")
    p.add_argument("--config", help="YAML generator settings")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze-trajectories", help="histogram of successful walk metapaths")
    p.add_argument("--log", required=True, help="trajectories.log from a training run")
    p.add_argument("--schema", required=True)
    p.add_argument("--inverse-edges", action="store_true", help="the run used inverse edges")
    p.add_argument("--top", type=int, default=20)
    p.add_argument("--output")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # module errors surface with their context
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
