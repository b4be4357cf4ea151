"""Command line entry point: gen, attack, sweep, stats, audit."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import gen_synthetic, write_edge_stream
from .experiment import METHODS, ExperimentConfig, action_stats, audit, read_steps, run_experiment, sweep


def _cmd_gen(args) -> int:
    data = gen_synthetic(args.nodes, args.snapshots, args.p_base, args.p_del, args.seed, args.instances)
    write_edge_stream(args.out, data)
    print(f"wrote {len(data)} instances of {args.snapshots}+1 snapshots on {args.nodes} nodes to {args.out}")
    return 0


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config)
    updates = {}
    if getattr(args, "method", None):
        updates["method"] = args.method
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return config.model_copy(update=updates) if updates else config


def _cmd_attack(args) -> int:
    config = _load_config(args)
    if args.dry_run:
        budget = config.budget()
        print(json.dumps({"n_nodes": config.n_nodes(), "k_limit": budget.k_limit,
                          "interaction_limit": budget.interaction_limit}))
        return 0
    out = run_experiment(config, args.out)
    rows = out["summary"]
    budget = out["budget"]
    mean_clean = sum(r["clean_f1"] for r in rows) / len(rows)
    mean_best = sum(r["best_f1"] for r in rows) / len(rows)
    print(f"{config.method}: K={budget.k_limit} I={budget.interaction_limit} "
          f"mean clean F1 {mean_clean:.4f} -> mean best F1 {mean_best:.4f} ({len(rows)} instances)")
    print(f"audit ok over {out['audit']['instances']} instances; results in {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    methods = args.methods.split(",") if args.methods else METHODS
    budgets = [int(b) for b in args.budgets.split(",")] if args.budgets else None
    rows = sweep(config, args.out, budgets, methods)
    for row in rows:
        print(f"{row['method']:>9} I={row['interaction_budget']:<6} mean best F1 {row['mean_best_f1']:.4f}")
    return 0


def _cmd_stats(args) -> int:
    print(json.dumps(action_stats(read_steps(args.steps)), indent=2))
    return 0


def _cmd_audit(args) -> int:
    run = Path(args.run_dir)
    mode = "attack"
    manifest = run / "manifest.json"
    if manifest.exists():
        mode = json.loads(manifest.read_text())["config"]["agent"]["reward_mode"]
    report = audit(run / "steps.jsonl", run / "summary.csv", mode)
    for err in report["errors"]:
        print(f"FAIL {err}")
    print(f"{'ok' if report['ok'] else 'FAILED'}: {report['instances']} instances audited")
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpdg-attack",
                                     description="Black-box evasion attacks on dynamic-graph link prediction.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    # also accept -v after the subcommand without clobbering an earlier one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="write a synthetic dataset as an edge-stream file")
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--snapshots", type=int, default=10, help="input snapshots per instance (T)")
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--p-base", type=float, default=0.1)
    p.add_argument("--p-del", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("attack", parents=[common], help="run one method on the configured instances")
    p.add_argument("config", help="experiment config (JSON)")
    p.add_argument("--out", default="runs/latest", help="output directory")
    p.add_argument("--method", choices=["gse-metp", "gse", "random"], help="override the config's method")
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--dry-run", action="store_true", help="print the resolved budgets and exit")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("sweep", parents=[common], help="mean best F1 against the interaction limit")
    p.add_argument("config")
    p.add_argument("--out", default="runs/sweep")
    p.add_argument("--methods", help="comma separated, default all three")
    p.add_argument("--budgets", help="comma separated interaction limits, default K, 2K, ..., 10K")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stats", parents=[common], help="per-method mean and variance of action coordinates")
    p.add_argument("steps", help="steps.jsonl from an attack run")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("audit", parents=[common], help="recompute a run's summary from its step log")
    p.add_argument("run_dir")
    p.set_defaults(func=_cmd_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
