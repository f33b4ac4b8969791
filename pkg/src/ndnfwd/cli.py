"""Command-line entry points.

Subcommands: ``run`` one scenario, ``compare`` the five strategies,
``sweep`` the six agent variants in both weight modes, ``validate`` a
scenario file. Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import harness
from .scenario import (
    MissingFile,
    ParseError,
    ScenarioConfig,
    ValidationError,
    bundled_scenario_path,
    load_scenario,
)


def resolve_scenario(value: str) -> Path:
    path = Path(value)
    if path.is_file():
        return path
    bundled = bundled_scenario_path(value)
    if bundled.is_file():
        return bundled
    raise MissingFile(value)


def _load(args) -> ScenarioConfig:
    cfg = load_scenario(resolve_scenario(args.scenario))
    if getattr(args, "seed", None) is not None:
        cfg.base_seed = args.seed
    if getattr(args, "runs", None) is not None:
        cfg.runs = args.runs
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    return cfg


def _print_summaries(summaries):
    print(f"{'strategy':<20} {'data_rx/s':>12} {'interests_tx/s':>15}")
    for s in summaries:
        print(f"{s.strategy:<20} {s.means['data_rx']:>12.2f} "
              f"{s.means['interests_tx_total']:>15.2f}")


def cmd_run(args) -> int:
    cfg = _load(args)
    runs = harness.run_replications(cfg, args.strategy, jobs=args.jobs)
    summary = harness.aggregate(runs)
    harness.write_csv([summary], runs, cfg.output_dir)
    _print_summaries([summary])
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    all_runs = []
    summaries = []
    for strategy in harness.COMPARE_STRATEGIES:
        runs = harness.run_replications(cfg, strategy, jobs=args.jobs)
        all_runs.extend(runs)
        summaries.append(harness.aggregate(runs))
    harness.write_csv(summaries, all_runs, cfg.output_dir)
    _print_summaries(summaries)
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    modes = ["fresh", "persist"] if args.modes == "both" else [args.modes]
    all_runs = []
    summaries = []
    for variant, params in harness.TABLE_VARIANTS.items():
        for mode in modes:
            label = f"{variant}-{mode}"
            variant_params = dict(cfg.dqnaf_params)
            variant_params.update(params)
            variant_cfg = dataclasses.replace(
                cfg, dqnaf_params=variant_params, weight_mode=mode,
                output_dir=cfg.output_dir)
            weights_dir = Path(cfg.output_dir) / "weights" / label
            runs = harness.run_replications(variant_cfg, "dqn-af", jobs=args.jobs,
                                            weights_dir=weights_dir)
            for r in runs:
                r.strategy = label
            all_runs.extend(runs)
            summaries.append(harness.aggregate(runs))
    harness.write_csv(summaries, all_runs, cfg.output_dir)
    _print_summaries(summaries)
    if args.modes == "both":
        _report_persist_effect(summaries)
    return 0


def _report_persist_effect(summaries):
    means = {s.strategy: s.means["data_rx"] for s in summaries}
    print("\nweight persistence effect (fresh -> persist):")
    for variant in harness.TABLE_VARIANTS:
        fresh = means.get(f"{variant}-fresh")
        persist = means.get(f"{variant}-persist")
        if fresh and persist:
            change = (persist - fresh) / fresh * 100.0
            print(f"  {variant}: {fresh:.2f} -> {persist:.2f} data/s ({change:+.2f}%)")


def cmd_validate(args) -> int:
    load_scenario(resolve_scenario(args.scenario))
    print("scenario OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndnfwd",
                                     description="NDN forwarding-strategy simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_strategy=False):
        p.add_argument("--scenario", default="paper",
                       help="scenario file path or bundled name (default: paper)")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--runs", type=int, default=None, help="override replication count")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        if with_strategy:
            p.add_argument("--strategy", default=None,
                           choices=["best-route", "multicast", "asf", "dq-learning", "dqn-af"],
                           help="strategy for the measure node (default: scenario file)")

    p_run = sub.add_parser("run", help="run one scenario")
    common(p_run, with_strategy=True)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run all five strategies")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sweep = sub.add_parser("sweep", help="run the six agent variants")
    common(p_sweep)
    p_sweep.add_argument("--modes", default="both", choices=["both", "fresh", "persist"])
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("--scenario", default="paper")
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError, MissingFile) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface as runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
