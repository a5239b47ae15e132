#!/usr/bin/env python3
"""
Replay the Fixture Corpus

Usage:
    python run_corpus.py [--corpus DIR] [--config FILE] [--seed N] [--out DIR] [--workers N] [--debug]

Example:
    python run_corpus.py --corpus corpus --out reports/corpus
"""

import argparse
import logging
import sys

from analysis.corpus import run_corpus
from common.config import AnalysisConfig, load_config_file, load_config_from_env, set_config
from common.formats import ExitCode


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="Compare fixture verdicts against their expectation sidecars")
    parser.add_argument("--corpus", default="corpus", help="Corpus directory (default: corpus)")
    parser.add_argument("--config", help="JSON file of base configuration overrides")
    parser.add_argument("--seed", type=int, help="Global seed")
    parser.add_argument("--out", help="Write per-fixture bundles and the summary here")
    parser.add_argument("--workers", type=int, help="Worker threads")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)

    try:
        config = load_config_from_env(AnalysisConfig())
        if args.config:
            config = load_config_file(args.config, config)
        if args.seed is not None:
            config.scan.seed = args.seed
        if args.workers is not None:
            config.scan.workers = max(1, args.workers)
            config.topology.workers = max(1, args.workers)
        if args.debug:
            config.log_level = "DEBUG"
        set_config(config)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.INPUT_ERROR

    # Configure logging
    logging.basicConfig(level=getattr(logging, config.log_level.upper(), logging.INFO), format=config.log_format)

    try:
        summary = run_corpus(args.corpus, config, out_dir=args.out)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.INPUT_ERROR

    print(summary.table(), end="")
    return summary.exit_code


if __name__ == "__main__":
    sys.exit(int(main()))
