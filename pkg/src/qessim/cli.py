"""Command-line entry points.

    qessim <experiment> [--config FILE] [--seed N] [--out DIR]
                        [--pulses N] [--dt NS] [--workers N] [-v]
    qessim validate-config --config FILE

Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
4 low-entropy abort.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import config as _config
from .errors import ConfigError, DivergenceError, LowEntropyError
from .experiments import RUNNERS

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_LOW_ENTROPY = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (defaults used otherwise)")
    p.add_argument("--seed", type=int, help="64-bit master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--pulses", type=int, help="number of analyzed pulses")
    p.add_argument("--dt", type=float, help="integration step (ns)")
    p.add_argument("--workers", type=int, help="worker process count")
    p.add_argument("-v", "--verbose", action="store_true", help="progress logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qessim",
        description="Two-laser quantum entropy source simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _config.EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)
    pv = sub.add_parser("validate-config", help="parse and validate a config file")
    pv.add_argument("--config", required=True)
    pv.add_argument("--emit", action="store_true",
                    help="print the normalized config JSON")
    return parser


def _load_config(args) -> _config.ExperimentConfig:
    if args.config:
        cfg = _config.load(args.config)
        if cfg.experiment != args.command:
            raise ConfigError(
                f"config is for experiment {cfg.experiment!r}, "
                f"but {args.command!r} was requested"
            )
    else:
        cfg = _config.default_config(args.command)
    if args.seed is not None:
        cfg = _config.with_seed(cfg, args.seed)
    if args.out is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, out_dir=args.out)
    if args.pulses is not None:
        cfg = _config.with_pulses(cfg, args.pulses)
    if args.dt is not None:
        cfg = _config.with_dt(cfg, args.dt)
    if args.workers is not None:
        import dataclasses

        cfg = dataclasses.replace(
            cfg, run=dataclasses.replace(cfg.run, workers=args.workers)
        )
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "validate-config":
            cfg = _config.load(args.config)
            if args.emit:
                import json

                print(json.dumps(_config.to_dict(cfg), indent=2, sort_keys=True))
            else:
                print(f"ok: {args.config} ({cfg.experiment})")
            return EXIT_OK
        cfg = _load_config(args)
        RUNNERS[args.command](cfg)
        print(f"{args.command}: outputs written to {cfg.out_dir}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except LowEntropyError as exc:
        print(f"low entropy: {exc}", file=sys.stderr)
        return EXIT_LOW_ENTROPY


if __name__ == "__main__":
    sys.exit(main())
