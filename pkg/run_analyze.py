#!/usr/bin/env python3
"""
Run the Condition Battery on a Map

Usage:
    python run_analyze.py --map MAP [--config FILE] [--condition NAME ...]
                          [--combination I,J ...] [--assert-codim2] [--seed N]
                          [--out DIR] [--workers N] [--debug]

Example:
    python run_analyze.py --map corpus/quadratic_shear.map --out reports/quadratic_shear
    python run_analyze.py --map corpus/king.map --condition rabier
"""

import argparse
import logging
import sys

from analysis.runner import run_analyze
from common.config import AnalysisConfig, CONDITION_NAMES, load_config_file, load_config_from_env, set_config
from common.formats import ExitCode
from verdict.combinations import parse_combination


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="Numerical injectivity evidence for maps R^n -> R^n")
    parser.add_argument("--map", required=True, help="Map DSL file")
    parser.add_argument("--config", help="JSON file of configuration overrides")
    parser.add_argument("--condition", action="append", choices=CONDITION_NAMES,
                        help="Condition to evaluate (repeatable; default: all)")
    parser.add_argument("--combination", action="append",
                        help="Combination to examine, e.g. 1,3 (repeatable; default: all)")
    parser.add_argument("--assert-codim2", action="store_true", help="Assert codim(S_f) >= 2")
    parser.add_argument("--seed", type=int, help="Global seed")
    parser.add_argument("--out", help="Output directory (default: from config)")
    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="Strip timestamps from outputs (default: on)")
    parser.add_argument("--workers", type=int, help="Worker threads")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    return parser.parse_args(argv)


def build_config(args):
    """Defaults, then INJ_* environment, then --config, then flags."""
    config = load_config_from_env(AnalysisConfig())
    if args.config:
        config = load_config_file(args.config, config)
    if args.condition:
        config.conditions = list(dict.fromkeys(args.condition))
    if args.combination:
        config.combinations = [parse_combination(text) for text in args.combination]
    if args.assert_codim2:
        config.assert_codim2 = True
    if args.seed is not None:
        config.scan.seed = args.seed
    if args.deterministic is not None:
        config.deterministic = args.deterministic
    if args.workers is not None:
        if args.workers < 1:
            raise ValueError(f"--workers must be >= 1, got {args.workers}")
        config.scan.workers = args.workers
        config.topology.workers = args.workers
    if args.debug:
        config.log_level = "DEBUG"
    set_config(config)
    return config


def main(argv=None) -> int:
    args = parse_args(argv)

    try:
        config = build_config(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.INPUT_ERROR

    # Configure logging
    logging.basicConfig(level=getattr(logging, config.log_level.upper(), logging.INFO), format=config.log_format)

    try:
        bundle = run_analyze(args.map, config, out_dir=args.out)
    except (OSError, ValueError) as e:
        print(f"error: {args.map}: {e}", file=sys.stderr)
        return ExitCode.INPUT_ERROR

    print(bundle.verdict.summary(), end="")
    if bundle.files:
        print(f"Wrote {len(bundle.files)} files to {args.out or config.output_dir}")
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(int(main()))
