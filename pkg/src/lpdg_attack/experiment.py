"""Experiment configuration, orchestration, result files, auditing and action diagnostics.

A run directory holds:

* ``steps.jsonl``  one JSON record per oracle query (``clean`` or ``step`` events)
* ``summary.csv``  one row per instance
* ``curve.csv``    mean best F1 reachable within each per-instance interaction budget
* ``manifest.json`` resolved config and budgets
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import defaultdict
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .agent import ActorCritic, AgentConfig, ReplayBuffer, compute_reward
from .data import InstanceData, gen_synthetic, load_edge_stream
from .graph import AttackBudget
from .gse import degree_feature
from .metp import AttackInstance, InstanceResult, random_attack_baseline, run_metp
from .predictors import LpdgOracle, PredictorParams

log = logging.getLogger(__name__)

METHODS = ("gse-metp", "gse", "random")
SUMMARY_FIELDS = ("method", "instance", "clean_f1", "best_f1", "queries", "steps", "attempts",
                  "k_limit", "interaction_limit")


class DatasetConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic", "edge_stream"] = "synthetic"
    n_nodes: int = Field(50, ge=2)
    p_base: float = Field(0.1, ge=0, le=1)
    p_del: float = Field(0.1, ge=0, le=1)
    paths: list[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _paths_for_streams(self):
        if self.kind == "edge_stream" and not self.paths:
            raise ValueError("edge_stream datasets need at least one path")
        return self


class PredictorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["persistence", "decay_frequency", "common_neighbor"] = "decay_frequency"
    decay: float = Field(0.9, gt=0, le=1)
    threshold: float = Field(0.5, ge=0, le=1)
    bin_threshold: float = Field(0.5, gt=0, lt=1)

    def params(self) -> PredictorParams:
        return PredictorParams(**self.model_dump())


class AgentSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(64, ge=1)
    buffer_capacity: int = Field(100_000, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    tau: float = Field(0.01, ge=0, le=1)
    explore_every: int = Field(10, ge=1)
    reward_mode: Literal["attack", "raw"] = "attack"
    hidden_sizes: tuple[int, ...] = (64,)
    pooling: Literal["flatten", "mean"] = "flatten"

    @model_validator(mode="after")
    def _batch_fits(self):
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size exceeds buffer_capacity")
        return self

    def config(self) -> AgentConfig:
        return AgentConfig(**self.model_dump())


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce a run. ``seed`` has no default on purpose."""

    model_config = ConfigDict(extra="forbid")

    seed: int
    method: Literal["gse-metp", "gse", "random"] = "gse-metp"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    n_instances: int = Field(10, ge=1)
    n_snapshots: int = Field(10, ge=1)
    delta: float = Field(0.02, ge=0, le=1)
    n_cap: int = Field(1000, ge=1)
    interaction_limit: Optional[int] = Field(None, ge=1)
    interaction_multiplier: float = Field(5.0, ge=1)
    predictor: PredictorConfig = Field(default_factory=PredictorConfig)
    agent: AgentSettings = Field(default_factory=AgentSettings)

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.model_validate(json.load(fh))

    def n_nodes(self) -> int:
        if self.dataset.kind == "synthetic":
            return self.dataset.n_nodes
        return load_instance_data(self)[0].n_nodes

    def budget(self, n_nodes: Optional[int] = None) -> AttackBudget:
        n = n_nodes if n_nodes is not None else self.n_nodes()
        budget = AttackBudget.build(n, self.delta, self.n_cap, self.interaction_limit, self.interaction_multiplier)
        if budget.k_limit < 1:
            raise ValueError("delta and n_cap allow no perturbations")
        return budget


def _seeds(seed: int) -> dict[str, np.random.SeedSequence]:
    names = ("data", "noise", "init", "explore", "sample")
    return dict(zip(names, np.random.SeedSequence(seed).spawn(len(names))))


def load_instance_data(config: ExperimentConfig) -> list[InstanceData]:
    ds = config.dataset
    if ds.kind == "synthetic":
        data_seed = int(_seeds(config.seed)["data"].generate_state(1)[0])
        return gen_synthetic(ds.n_nodes, config.n_snapshots, ds.p_base, ds.p_del, data_seed, config.n_instances)
    data: list[InstanceData] = []
    for path in ds.paths:
        data.extend(load_edge_stream(path, config.n_snapshots))
    if len(data) < config.n_instances:
        raise ValueError(f"dataset yields {len(data)} instances, config asks for {config.n_instances}")
    data = data[:config.n_instances]
    if len({d.n_nodes for d in data}) != 1:
        raise ValueError("all instances must share one node universe")
    return data


def build_instances(config: ExperimentConfig, data: list[InstanceData], budget: AttackBudget) -> list[AttackInstance]:
    noise_seeds = _seeds(config.seed)["noise"].spawn(len(data))
    params = config.predictor.params()
    return [
        AttackInstance(
            instance_id=i,
            clean=d.sequence,
            truth=d.truth,
            oracle=LpdgOracle(params, d.truth, budget.interaction_limit),
            feature=degree_feature(d.sequence, noise_seeds[i]),
            k_limit=budget.k_limit,
        )
        for i, d in enumerate(data)
    ]


def execute(config: ExperimentConfig, sink=None) -> tuple[list[InstanceResult], AttackBudget, int]:
    """Run the configured method in memory, streaming log records to ``sink``.

    Returns per-instance results, the resolved budget and the node count.
    """
    data = load_instance_data(config)
    n_nodes = data[0].n_nodes
    budget = config.budget(n_nodes)
    instances = build_instances(config, data, budget)
    seeds = _seeds(config.seed)
    agent_cfg = config.agent.config()

    def tagged(rec):
        if sink is not None:
            sink({"method": config.method, **rec})

    log.info("method=%s N=%d K=%d I=%d instances=%d", config.method, n_nodes, budget.k_limit,
             budget.interaction_limit, len(instances))
    if config.method == "gse-metp":
        agent = ActorCritic(n_nodes, agent_cfg, np.random.default_rng(seeds["init"]))
        buffer = ReplayBuffer(agent_cfg.buffer_capacity)
        results = run_metp(instances, agent, buffer, np.random.default_rng(seeds["explore"]),
                           np.random.default_rng(seeds["sample"]), sink=tagged)
    else:
        # instances run one after another, each with its own generators (and, for
        # gse, its own agent and buffer), so a smaller I replays an exact prefix
        results = []
        per_inst = zip(instances, seeds["init"].spawn(len(instances)), seeds["explore"].spawn(len(instances)),
                       seeds["sample"].spawn(len(instances)))
        for inst, init_seed, explore_seed, sample_seed in per_inst:
            explore_rng = np.random.default_rng(explore_seed)
            if config.method == "random":
                results.append(random_attack_baseline(inst, explore_rng, sink=tagged))
                continue
            agent = ActorCritic(n_nodes, agent_cfg, np.random.default_rng(init_seed))
            buffer = ReplayBuffer(agent_cfg.buffer_capacity)
            results.extend(run_metp([inst], agent, buffer, explore_rng, np.random.default_rng(sample_seed),
                                    sink=tagged))
    return results, budget, n_nodes


def summary_rows(method: str, results: Iterable[InstanceResult], budget: AttackBudget) -> list[dict]:
    return [
        {"method": method, "instance": r.instance_id, "clean_f1": r.clean_f1, "best_f1": r.best_f1,
         "queries": r.queries, "steps": r.steps, "attempts": r.attempts,
         "k_limit": budget.k_limit, "interaction_limit": budget.interaction_limit}
        for r in results
    ]


def budget_curve(records: list[dict], interaction_limit: int) -> list[dict]:
    """Mean over instances of the best F1 seen within the first q queries, q = 1..I.

    Round-robin runs with a smaller interaction limit are exact prefixes of
    a larger run, so one log yields the whole interaction-budget curve.
    """
    per_inst: dict[tuple, list[float]] = defaultdict(list)
    for rec in records:
        per_inst[(rec["method"], rec["instance"])].append(rec["f_next"])
    by_method: dict[str, list[np.ndarray]] = defaultdict(list)
    for (method, _), values in per_inst.items():
        best = np.minimum.accumulate(np.asarray(values, dtype=np.float64))
        padded = np.concatenate([best, np.full(max(0, interaction_limit - len(best)), best[-1])])
        by_method[method].append(padded[:interaction_limit])
    rows = []
    for method in sorted(by_method):
        mean = np.mean(by_method[method], axis=0)
        rows.extend({"method": method, "interaction_budget": q + 1, "mean_best_f1": float(v)}
                    for q, v in enumerate(mean))
    return rows


def _write_csv(path: Path, rows: list[dict], fields: Iterable[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    path.write_text(buf.getvalue())


def read_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_steps(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Run one configured attack and write steps, summary, curve and manifest files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    steps_path = out / "steps.jsonl"
    records: list[dict] = []
    with open(steps_path, "w") as fh:
        def sink(rec):
            records.append(rec)
            fh.write(json.dumps(rec) + "\n")
        results, budget, n_nodes = execute(config, sink)

    rows = summary_rows(config.method, results, budget)
    _write_csv(out / "summary.csv", rows, SUMMARY_FIELDS)
    _write_csv(out / "curve.csv", budget_curve(records, budget.interaction_limit),
               ("method", "interaction_budget", "mean_best_f1"))
    manifest = {
        "config": config.model_dump(mode="json"),
        "budget": asdict(budget),
        "n_nodes": n_nodes,
        "deterministic": True,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    report = audit(steps_path, out / "summary.csv", config.agent.reward_mode)
    if not report["ok"]:
        raise AssertionError("audit failed: " + "; ".join(report["errors"][:5]))
    return {"summary": rows, "budget": budget, "audit": report}


def sweep(config: ExperimentConfig, out_dir: str | Path, budgets: Optional[list[int]] = None,
          methods: Iterable[str] = METHODS) -> list[dict]:
    """Re-run each method at every interaction limit; writes ``sweep.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = config.budget().k_limit
    budgets = budgets or [m * k for m in range(1, 11)]
    rows = []
    for method in methods:
        for limit in budgets:
            cfg = config.model_copy(update={"method": method, "interaction_limit": limit})
            results, _, _ = execute(cfg)
            rows.append({"method": method, "interaction_budget": limit,
                         "mean_best_f1": float(np.mean([r.best_f1 for r in results]))})
            log.info("sweep %s I=%d mean best F1 %.4f", method, limit, rows[-1]["mean_best_f1"])
    _write_csv(out / "sweep.csv", rows, ("method", "interaction_budget", "mean_best_f1"))
    return rows


COORDS = ("add_u", "add_v", "del_u", "del_v")


def action_stats(records: Iterable[dict]) -> dict[str, dict]:
    """Per-method mean and population variance of each action coordinate."""
    actions: dict[str, list] = defaultdict(list)
    for rec in records:
        if rec.get("event") == "step":
            actions[rec.get("method", "unknown")].append(rec["action"])
    if not actions:
        raise ValueError("log has no step records")
    out = {}
    for method, acts in sorted(actions.items()):
        arr = np.asarray(acts, dtype=np.float64)
        out[method] = {
            "steps": len(arr),
            "mean": dict(zip(COORDS, arr.mean(axis=0).tolist())),
            "variance": dict(zip(COORDS, arr.var(axis=0).tolist())),
        }
    return out


def audit(steps_path: str | Path, summary_path: str | Path, reward_mode: str = "attack") -> dict:
    """Recompute the summary from the step log and check query accounting.

    Checks, per instance: queries run 1, 2, 3, ... with the clean query first;
    queries = 1 + steps <= I; every attempt but an exhausted last one has
    exactly K steps; each f_prev chains from the previous f_next (or the clean
    F1 at step 1); rewards match the F1 pair under ``reward_mode`` (the
    agent-free random baseline always logs the ``attack`` sign); best F1 is
    the minimum of all queried values.
    """
    records = read_steps(steps_path)
    summary = read_csv(summary_path)
    errors: list[str] = []
    by_inst: dict[tuple, list[dict]] = defaultdict(list)
    for rec in records:
        by_inst[(rec["method"], rec["instance"])].append(rec)

    recomputed = {}
    for row in summary:
        key = (row["method"], int(row["instance"]))
        k_limit, i_limit = int(row["k_limit"]), int(row["interaction_limit"])
        recs = by_inst.pop(key, [])
        tag = f"{key[0]}/{key[1]}"
        if not recs or recs[0]["event"] != "clean":
            errors.append(f"{tag}: log does not start with the clean query")
            continue
        clean = recs[0]["f_next"]
        steps = recs[1:]
        if [r["queries"] for r in recs] != list(range(1, len(recs) + 1)):
            errors.append(f"{tag}: query counter does not advance by exactly one")
        if len(recs) > i_limit:
            errors.append(f"{tag}: {len(recs)} queries exceed I={i_limit}")
        attempts: dict[int, list[dict]] = defaultdict(list)
        prev_f, prev_attempt = clean, None
        mode = "attack" if key[0] == "random" else reward_mode
        for r in steps:
            if r["event"] != "step":
                errors.append(f"{tag}: unexpected {r['event']} record after the clean query")
                break
            if r["attempt"] != prev_attempt:
                prev_f, prev_attempt = clean, r["attempt"]
            attempts[r["attempt"]].append(r)
            if r["f_prev"] != prev_f:
                errors.append(f"{tag}: attempt {r['attempt']} step {r['step']} f_prev breaks the chain")
            if r["reward"] != compute_reward(r["f_prev"], r["f_next"], mode):
                errors.append(f"{tag}: reward mismatch at attempt {r['attempt']} step {r['step']}")
            prev_f = r["f_next"]
        order = sorted(attempts)
        if order != list(range(1, len(order) + 1)):
            errors.append(f"{tag}: attempts are not numbered 1..n")
        for a in order:
            n_steps = len(attempts[a])
            if [r["step"] for r in attempts[a]] != list(range(1, n_steps + 1)):
                errors.append(f"{tag}: attempt {a} steps are not numbered 1..k")
            exhausted_last = a == order[-1] and len(recs) == i_limit
            if n_steps != k_limit and not (exhausted_last and n_steps < k_limit):
                errors.append(f"{tag}: attempt {a} has {n_steps} steps, K={k_limit}")
        if len(recs) < i_limit and k_limit > 0:
            errors.append(f"{tag}: stopped at {len(recs)} queries before reaching I={i_limit}")
        recomputed[key] = {
            "clean_f1": clean,
            "best_f1": min(r["f_next"] for r in recs),
            "queries": len(recs),
            "steps": len(steps),
            "attempts": len(order),
        }
        for field in ("clean_f1", "best_f1"):
            if float(row[field]) != recomputed[key][field]:
                errors.append(f"{tag}: summary {field}={row[field]} but log gives {recomputed[key][field]!r}")
        for field in ("queries", "steps", "attempts"):
            if int(row[field]) != recomputed[key][field]:
                errors.append(f"{tag}: summary {field}={row[field]} but log gives {recomputed[key][field]}")
    for key in by_inst:
        errors.append(f"{key[0]}/{key[1]}: log records with no summary row")
    return {"ok": not errors, "errors": errors, "instances": len(recomputed)}
