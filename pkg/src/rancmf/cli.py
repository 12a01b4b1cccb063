"""Command-line entry points: train, validate, detect, sweep.

All subcommands are reproducible: the same config file and seed produce
byte-identical outputs.  Exit code 0 on success, nonzero with a diagnostic
on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .detector import AlertError, ManifestError
from .harness import (POLICY_CHOICES, ExperimentConfig, export_report,
                      load_experiment_config, run_cd_demo, run_sweep,
                      run_training, run_validation)
from .ndt import ConfigurationError


def _load_config(path, seed=None, policy=None) -> ExperimentConfig:
    config = load_experiment_config(path) if path else ExperimentConfig()
    if seed is not None:
        config.seed = seed
    if policy is not None:
        config.policy = policy
    return config


def cmd_train(args) -> int:
    config = _load_config(args.config, seed=args.seed)
    agent_cfg = config.drm_agent if args.objective == "drm" else config.ee_agent
    result = run_training(args.objective, config.network, agent_cfg,
                          config.seed, args.out)
    print(f"wrote {result['weights']} and {result['curve']}")
    return 0


def cmd_validate(args) -> int:
    config = _load_config(args.config, seed=args.seed, policy=args.policy)
    if args.drm_weights:
        config.drm_weights = args.drm_weights
    if args.ee_weights:
        config.ee_weights = args.ee_weights
    report = run_validation(config)
    paths = export_report(report, config, args.out)
    print(f"wrote {paths['steps']}, {paths['summary']}, {paths['config']}")
    return 0


def cmd_detect(args) -> int:
    result = run_cd_demo(args.manifests, args.alerts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args.config, seed=args.seed)
    agent_cfg = config.drm_agent if args.objective == "drm" else config.ee_agent
    values = [float(v) for v in args.values.split(",") if v]
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    results = run_sweep(args.objective, config.network, agent_cfg, args.param,
                        values, config.seed, args.out)
    for res in results:
        print(f"wrote {res['weights']} and {res['curve']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rancmf",
        description="Conflict-managed multi-cell power control experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train one power-control agent")
    train.add_argument("--objective", choices=("drm", "ee"), required=True)
    train.add_argument("--config", help="experiment config JSON")
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", required=True, help="output directory")
    train.set_defaults(func=cmd_train)

    validate = sub.add_parser("validate",
                              help="policy-comparison validation run")
    validate.add_argument("--policy", choices=POLICY_CHOICES, required=True)
    validate.add_argument("--drm-weights")
    validate.add_argument("--ee-weights")
    validate.add_argument("--config", help="experiment config JSON")
    validate.add_argument("--seed", type=int, default=None)
    validate.add_argument("--out", required=True, help="output directory")
    validate.set_defaults(func=cmd_validate)

    detect = sub.add_parser("detect", help="conflict-detection demo")
    detect.add_argument("--manifests", required=True, help="manifest JSON file")
    detect.add_argument("--alerts", help="KPI alert JSON file")
    detect.add_argument("--out", required=True, help="output JSON file")
    detect.set_defaults(func=cmd_detect)

    sweep = sub.add_parser("sweep", help="hyperparameter sweep training runs")
    sweep.add_argument("--param", required=True,
                       choices=("power_step", "learning_rate", "discount"))
    sweep.add_argument("--values", required=True,
                       help="comma-separated numeric values")
    sweep.add_argument("--objective", choices=("drm", "ee"), required=True)
    sweep.add_argument("--config", help="experiment config JSON")
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ManifestError, AlertError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
