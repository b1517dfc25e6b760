"""Command-line entry point: ``nvdecoherence --config run.json`` or ``--preset fig1b``."""
from __future__ import annotations

import argparse
import sys

from .config import FORMATS, PRESETS, load_config
from .errors import ConfigError, NVDecoherenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nvdecoherence",
        description="Monte Carlo and analytic decoherence control for NV-center qudits.")
    src = ap.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="JSON experiment config")
    src.add_argument("--preset", choices=PRESETS, help="built-in figure experiment")
    ap.add_argument("--out", metavar="DIR", help="output directory (default: from config, else ./out)")
    ap.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
    ap.add_argument("--trajectories", type=_positive, help="Monte Carlo trajectories")
    ap.add_argument("--workers", type=_positive, default=None,
                    help="worker processes (speed only; results do not depend on it)")
    ap.add_argument("--format", choices=FORMATS, help="output format")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    from .runner import run_experiment

    try:
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = load_config({"mode": "preset", "preset": args.preset})
        cfg = cfg.with_overrides(seed=args.seed, trajectories=args.trajectories, out=args.out,
                                 fmt=args.format, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NVDecoherenceError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        files = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past validation is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
