"""Command-line entry point.

Run one scheme or sweep all six over a shared population snapshot:

    cflsim --config configs/reference.yaml --scheme fg-split --out runs/a
    cflsim --config configs/reference.yaml --sweep --out runs/sweep

Compare completed runs:

    cflsim --summarize runs/sweep/baseline runs/sweep/fg-round --out cmp.csv

Exit codes: 0 success, 1 runtime numeric failure, 2 usage/config errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericDivergenceError
from .metrics import (summarize, write_events_jsonl, write_metrics_csv,
                      write_summary_csv)
from .orchestrator import SCHEME_NAMES, run_experiment
from .synthdata import Population, population_hash, population_to_json


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cflsim",
        description="Clustered federated learning simulator for hierarchical "
                    "wireless networks")
    parser.add_argument("--config", type=Path, help="experiment config (YAML)")
    parser.add_argument("--scheme", choices=SCHEME_NAMES,
                        help="selection/aggregation scheme to run")
    parser.add_argument("--r-agg", type=int, default=None,
                        help="cloud aggregation interval for round-based schemes")
    parser.add_argument("--rounds", type=int, default=None,
                        help="override the number of global rounds")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the run seed")
    parser.add_argument("--out", type=Path, required=True,
                        help="output directory (or summary CSV with --summarize)")
    parser.add_argument("--sweep", action="store_true",
                        help="run every scheme once over one population")
    parser.add_argument("--summarize", nargs="+", type=Path, metavar="DIR",
                        help="compare completed run directories instead of running")
    return parser


def _write_run(out: Path, cfg: ExperimentConfig, scheme_name: str,
               population: Population, rounds: int, seed: int,
               r_agg: int | None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    scheme = cfg.scheme(scheme_name, r_agg=r_agg)
    history = run_experiment(population, scheme, rounds, seed,
                             cfg.run_params())
    edge_ids = sorted(set(population.edge_assignment.values()))
    write_metrics_csv(out / "metrics.csv", history, edge_ids)
    write_events_jsonl(out / "events.jsonl", history)
    resolved = cfg.resolved()
    resolved.update({
        "scheme": scheme_name, "seed": seed, "rounds": rounds,
        "r_agg": scheme.r_agg, "population_hash": population_hash(population),
    })
    (out / "config-resolved.json").write_text(
        json.dumps(resolved, sort_keys=True, indent=2) + "\n")


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.summarize:
        try:
            table = summarize(args.summarize)
        except (ValueError, FileNotFoundError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        write_summary_csv(args.out, table)
        return 0

    if args.config is None:
        parser.print_usage(sys.stderr)
        print("error: --config is required to run experiments", file=sys.stderr)
        return 2
    if not args.sweep and args.scheme is None:
        print("error: pick --scheme or --sweep", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    rounds = cfg.run.rounds if args.rounds is None else args.rounds
    seed = cfg.run.seed if args.seed is None else args.seed
    population = cfg.build_population()

    try:
        if args.sweep:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / "population.json").write_bytes(
                population_to_json(population))
            for name in SCHEME_NAMES:
                _write_run(args.out / name, cfg, name, population, rounds,
                           seed, args.r_agg)
        else:
            _write_run(args.out, cfg, args.scheme, population, rounds, seed,
                       args.r_agg)
            (args.out / "population.json").write_bytes(
                population_to_json(population))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericDivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
