"""Command-line entry point: ``rislos {fig2,track,estimate-once,trajectory}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .harness import (ConfigError, ExperimentConfig, emit_results, pilots_to_reach, run_estimate_once, run_fig2,
                      run_fig3, run_trajectory, tracking_summary)

log = logging.getLogger("rislos")

COMMANDS = {
    "fig2": (run_fig2, "mean SE versus pilot length (MLE random/smart init, LS, perfect CSI)"),
    "track": (run_fig3, "per-instant SE under periodic re-configuration along a random walk"),
    "estimate-once": (run_estimate_once, "one adaptive estimation session on a random channel"),
    "trajectory": (run_trajectory, "export a random-walk trajectory with its RIS angles"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rislos", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file with flat ExperimentConfig keys")
        p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
        p.add_argument("--out", help="output file (default: <command>.<format>)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--trials", type=int, help="override monte_carlo_trials")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _summary(command: str, table) -> list[str]:
    if command == "fig2":
        return [f"{name}: 98% of perfect-CSI SE at L = {pilots_to_reach(table, name)}"
                for name in ("mle_smart", "mle_random", "ls")]
    if command == "track":
        periods = sorted({r[0] for r in table.rows})
        return [f"policy {p:g} s: {tracking_summary(table, p)}" for p in periods]
    return []


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
        overrides = {k: v for k, v in (("seed", args.seed), ("workers", args.workers),
                                       ("monte_carlo_trials", args.trials)) if v is not None}
        if overrides:
            config = config.replace(**overrides)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"rislos: invalid configuration: {exc}", file=sys.stderr)
        return 2

    run, _ = COMMANDS[args.command]
    log.info("running %s with seed %d", args.command, config.seed)
    table = run(config)
    out = args.out or f"{args.command}.{args.format}"
    try:
        emit_results(table, out, args.format)
    except OSError as exc:
        print(f"rislos: {exc.strerror}", file=sys.stderr)
        return 1
    for line in _summary(args.command, table):
        print(line)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
