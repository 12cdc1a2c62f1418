"""Command-line entry point.

Examples
--------
::

    volterra-mortality experiment --config run.ini --out results
    volterra-mortality hedge --config run.ini --seed 7 --threads 4
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, VolterraMortalityError
from .experiments import run_experiment

__all__ = ["main", "build_parser"]

_SUBCOMMAND_EXPERIMENT = {"price": "price_single", "survival": "survival_curves", "hedge": "hedging_comparison"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volterra-mortality", description="Volterra mortality pricing and hedging experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "price": "price the configured product on a seeded history",
        "survival": "survival curves under the Volterra and Markov models",
        "hedge": "mean-variance hedging comparison",
        "experiment": "run the experiment named in the configuration",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="INI configuration file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override numerics.master_seed")
        p.add_argument("--threads", type=int, help="worker threads for path-parallel stages")
        p.add_argument("--out", type=Path, help="output directory (overrides experiment.output_dir)")
        p.add_argument("--plots", action="store_true", help="also write SVG plots")
    return parser


def _configure(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else parse_config("")
    problems = []
    if args.seed is not None:
        if args.seed < 0:
            problems.append("--seed: must be non-negative")
        else:
            cfg.numerics = replace(cfg.numerics, master_seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            problems.append("--threads: must be at least 1")
        else:
            cfg.numerics = replace(cfg.numerics, threads=args.threads)
    if args.plots:
        cfg.numerics = replace(cfg.numerics, plots=True)
    if problems:
        raise ConfigError(problems)
    if args.command in _SUBCOMMAND_EXPERIMENT:
        cfg.name = _SUBCOMMAND_EXPERIMENT[args.command]
    return cfg


def main(argv=None) -> int:
    """Run the CLI; returns 0 on success, 2 on configuration errors and 3
    on numerical or model errors."""
    args = build_parser().parse_args(argv)
    try:
        cfg = _configure(args)
        files = run_experiment(cfg, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except VolterraMortalityError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
