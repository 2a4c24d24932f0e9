"""Command-line entry point.

``qrmsim <scan|gate|cat|ghz> --config FILE --out DIR [--seed N] [--trajectories N] [--fock-dim N]``
runs one experiment and writes ``series.csv``, ``summary.csv``, ``plot.svg``
and ``meta.txt``. ``qrmsim validate`` runs the invariant suite.

Exit codes: 0 success, 1 configuration error, 2 numerical budget exceeded,
3 validation failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from .config import ConfigError, parse_config, read_config
from .dynamics import NumericalBudgetError
from .output import format_number, write_result
from .protocols import RegimeError, run_experiment
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_VALIDATION = 0, 1, 2, 3
EXPERIMENTS = ("scan", "gate", "cat", "ghz")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrmsim", description="Driven multi-qubit Rabi model simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, type=Path, help="key = value configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides the 'out' key)")
        sp.add_argument("--seed", type=int, help="master seed for trajectory sampling")
        sp.add_argument("--trajectories", type=int, help="number of quantum trajectories")
        sp.add_argument("--fock-dim", type=int, help="resonator truncation")
    v = sub.add_parser("validate", help="run the invariant suite")
    v.add_argument("--config", type=Path, help="ignored; accepted for symmetry")
    v.add_argument("--out", type=Path, help="optional directory for validation.txt")
    return parser


def _validate(args) -> int:
    lines: list[str] = []

    def emit(line: str) -> None:
        print(line, flush=True)
        lines.append(line)

    checks = run_validation(emit)
    failed = sum(not c.passed for c in checks)
    emit(f"{len(checks) - failed}/{len(checks)} checks passed")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "validation.txt").write_text("\n".join(lines) + "\n")
    return EXIT_VALIDATION if failed else EXIT_OK


def _experiment(args) -> int:
    try:
        text = args.config.read_text()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cfg = parse_config(text, protocol=args.command, seed=args.seed,
                               n_traj=args.trajectories, fock_dim=args.fock_dim)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        out = args.out or (Path(read_config(text)["out"]) if "out" in read_config(text) else None)
        if out is None:
            raise ConfigError("no output directory: pass --out or set 'out' in the config")
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg)
    except RegimeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBudgetError as exc:
        print(f"numerical budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_result(result, cfg, out)
    for k, v in result.summary.items():
        print(f"{k} = {format_number(v)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return _validate(args)
    return _experiment(args)


if __name__ == "__main__":
    sys.exit(main())
