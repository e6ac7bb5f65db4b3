"""``sense`` command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENTS, RUNNERS, ConfigError, ExperimentConfig, run_validate
from .wishart import NumericalFailure


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("trials must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sense", description="Run spectrum-sensing experiments from a config file.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="flat 'key = value' config file")
    p.add_argument("--out", help="output path (default: stdout, or 'out' from the config)")
    p.add_argument("--seed", type=_u64, help="master seed, overrides the config")
    p.add_argument("--trials", type=_nonneg, help="Monte Carlo trials, overrides the config")
    return p


def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(
            args.config, experiment=args.experiment, seed=args.seed, trials=args.trials, out=args.out
        )
    except (ConfigError, OSError) as exc:
        print(f"sense: {exc}", file=sys.stderr)
        return 2
    try:
        if cfg.experiment == "validate":
            text, ok = run_validate(cfg)
            _emit(text, cfg.out)
            return 0 if ok else 1
        _emit(RUNNERS[cfg.experiment](cfg), cfg.out)
    except ConfigError as exc:
        print(f"sense: {args.config}: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"sense: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
