"""Command-line entry point: ``qwalk <config.json> [--out DIR] [--threads N] [--seed S]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import is_validation_error, parse_config, run_experiment
from .errors import NumericalError

log = logging.getLogger("qwalk2d")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qwalk", description="Run a 2D quantum walk experiment from a JSON config.")
    p.add_argument("config", help="path to the JSON experiment config")
    p.add_argument("--out", help="output directory (default: config 'out' or current directory)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads for grid sweeps (outputs do not depend on it)")
    p.add_argument("--seed", type=int, default=None, help="seed for experiments that sample random coins")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = parse_config(text)
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        paths = run_experiment(cfg, args.out, args.threads, args.seed)
    except OSError as exc:
        print(f"error: I/O failure on {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:
        if is_validation_error(exc) or isinstance(exc, ValueError):
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        raise
    for path in paths:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
