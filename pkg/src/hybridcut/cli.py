"""Command line entry point: single-problem runs, sweeps and scaling fits."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from .errors import HybridCutError, InsufficientData
from .experiments import (
    InvariantViolation,
    SweepConfig,
    fit_scaling_exponent,
    read_records,
    records_to_csv,
    records_to_json,
    run_sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; 2 is reserved for invariant violations here
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, nargs="+", required=True, help="input size(s)")
    p.add_argument("--depth", type=int, nargs="+", required=True, help="coherent depth limit(s)")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write records here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridcut", description="Depth-limited query algorithm experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("threshold", help="is the Hamming weight above k?")
    _common(p)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--strategy", choices=("interpolate", "parallel"), nargs="+", default=["interpolate"])
    p.add_argument("--weight", type=int, nargs="+", help="input weights, cycled over trials")
    p.add_argument("--cost-multiplier", type=int, default=1)

    p = sub.add_parser("symmetric", help="evaluate a symmetric Boolean function")
    _common(p)
    p.add_argument("--function", default="majority", help="parity, majority or a JSON table path")
    p.add_argument("--alpha", type=float, default=0.0)

    p = sub.add_parser("nand", help="evaluate a balanced NAND tree with N leaves")
    _common(p)
    p.add_argument("--strategy", choices=("interpolate", "parallel"), nargs="+", default=["interpolate"])
    p.add_argument("--cost-multiplier", type=int, default=1)

    p = sub.add_parser("sweep", help="run a JSON sweep configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("fit", help="log-log slope of median y against x from a records CSV")
    p.add_argument("records")
    p.add_argument("--x", default="depth_limit")
    p.add_argument("--y", default="total_queries")
    p.add_argument("--problem")
    p.add_argument("--strategy")
    return parser


def _config(args) -> tuple[SweepConfig, str | None]:
    """The sweep to run and where its records go (None: stdout)."""
    if args.command == "sweep":
        cfg = SweepConfig.load(args.config)
        return SweepConfig(**{**asdict(cfg), "out": None}), args.out or cfg.out
    common = dict(
        problem=args.command,
        sizes=args.n,
        depths=args.depth,
        trials=args.trials,
        seed=args.seed,
    )
    if args.command == "threshold":
        cfg = SweepConfig(
            ks=args.k, strategies=args.strategy, weights=args.weight,
            cost_multiplier=args.cost_multiplier, **common,
        )
    elif args.command == "symmetric":
        cfg = SweepConfig(function=args.function, alpha=args.alpha, **common)
    else:
        cfg = SweepConfig(strategies=args.strategy, cost_multiplier=args.cost_multiplier, **common)
    return cfg, args.out


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def _fit(args) -> None:
    rows = read_records(args.records)
    if args.problem:
        rows = [r for r in rows if r["problem"] == args.problem]
    if args.strategy:
        rows = [r for r in rows if r["strategy"] == args.strategy]
    skipped = sum(r["fallback"] for r in rows)
    fit = fit_scaling_exponent(rows, args.x, args.y)
    print(json.dumps({**fit._asdict(), "points": len(rows) - skipped, "fallback_excluded": skipped}))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "fit":
            _fit(args)
            return EXIT_OK
        cfg, out = _config(args)
        if out is not None:
            open(out, "a").close()  # fail on an unwritable path before doing any work
        records = run_sweep(cfg, workers=args.workers)
        _emit(records_to_json(records) if args.format == "json" else records_to_csv(records), out)
        return EXIT_OK
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (UsageError, InsufficientData, HybridCutError, ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
