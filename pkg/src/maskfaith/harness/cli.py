"""Command-line entry point: ``maskfaith <subcommand> [--config PATH] [--seed N] [--out DIR] [--max-samples N]``.

Each metric subcommand runs the pipeline prefix it depends on with only that
metric enabled. Exit codes: 0 success, 2 config error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, ExperimentConfig, MetricsConfig, AttackConfig, load_config
from .pipeline import StageError, run_experiment
from .plots import render_plots

BASE = ("data", "train", "evaluate")
NO_METRICS = dict(fidelity=False, non_pert=False, aopc=None, drift=None, random_baseline=False)

COMMANDS = {
    "generate": ("data",),
    "train": ("data", "train", "evaluate", "report"),
    "attribute": BASE + ("attribute", "report"),
    "fidelity": BASE + ("attribute", "fidelity", "random_baseline", "report"),
    "aopc": BASE + ("attribute", "aopc", "report"),
    "drift": BASE + ("attribute", "drift", "report"),
    "attack": BASE + ("attribute", "attack", "report"),
    "advtrain": BASE + ("attribute", "attack", "advtrain", "report"),
    "run": None,
}


def _restrict(cfg: ExperimentConfig, command: str) -> ExperimentConfig:
    if command in ("run", "generate", "train"):
        return cfg
    keep = {"fidelity": ("fidelity", "non_pert", "random_baseline"), "aopc": ("aopc",),
            "drift": ("drift",)}.get(command, ())
    defaults = MetricsConfig()
    metrics = {k: (getattr(cfg.metrics, k) if getattr(cfg.metrics, k) not in (None, False)
                   else getattr(defaults, k)) if k in keep else v
               for k, v in NO_METRICS.items()}
    cfg.metrics = MetricsConfig(**metrics)
    if command in ("attack", "advtrain"):
        cfg.attack = cfg.attack or AttackConfig()
        cfg.adv_training = command == "advtrain"
    else:
        cfg.attack = None
        cfg.adv_training = False
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maskfaith", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["report"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="primary seed (unsigned 64-bit)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--max-samples", type=int, dest="max_samples", help="per-stage sample cap")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        if args.max_samples is not None:
            cfg.max_samples = args.max_samples
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "report":
        manifest = render_plots(cfg.output_dir)
        print(json.dumps(manifest, indent=2, sort_keys=True))
        return 0

    cfg = _restrict(cfg, args.command)
    stages = COMMANDS[args.command]
    try:
        summary = run_experiment(cfg, stages) if stages else run_experiment(cfg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({k: v for k, v in summary.items() if k not in ("artifacts", "plots")},
                     indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
