"""Command-line driver: ``rackoid verify | converge | list-suites``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .suites import CONVERGENCE_OPS, SUITES, ConfigError, SuiteConfig, convergence_study, report_json, run_suite

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _grids(text: str) -> list[int]:
    try:
        return [int(g) for g in text.split(",") if g.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rackoid", description="Seeded residual checks for the cotangent-path rackoid.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="run one verification suite")
    v.add_argument("--suite", required=True)
    v.add_argument("--dim", type=int, default=2)
    v.add_argument("--geometry", choices=("torus", "chart"), default=None,
                   help="defaults to the suite's required geometry, else torus")
    v.add_argument("--grid", type=int, default=64, help="even number of Simpson intervals")
    v.add_argument("--trials", type=int, default=10)
    v.add_argument("--seed", type=_seed, default=42)
    v.add_argument("--amplitude", type=float, default=None, help="random field amplitude ρ")
    v.add_argument("--tol", type=float, default=None, help="identity tolerance (suite default if omitted)")
    v.add_argument("--fd-tol", type=float, default=1e-4)
    v.add_argument("--report", type=Path, default=None, help="JSON output path (stdout if omitted)")

    c = sub.add_parser("converge", help="empirical convergence order of a discretized operation")
    c.add_argument("--op", required=True, choices=sorted(CONVERGENCE_OPS))
    c.add_argument("--grids", type=_grids, default=[8, 16, 32, 64])
    c.add_argument("--report", type=Path, default=None)

    sub.add_parser("list-suites", help="print registered suites")
    return p


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def _verify(args) -> int:
    seed = args.seed
    env = os.environ.get("RACKOID_SEED")
    if env:
        try:
            seed = _seed(env)
        except (ValueError, argparse.ArgumentTypeError):
            print(f"rackoid: error: RACKOID_SEED={env!r} is not a valid seed", file=sys.stderr)
            return EXIT_CONFIG
    spec = SUITES.get(args.suite)
    geometry = args.geometry or (spec.geometry if spec and spec.geometry else "torus")
    cfg = SuiteConfig(args.suite, dim=args.dim, geometry=geometry, grid_n=args.grid, trials=args.trials,
                      seed=seed, amplitude=args.amplitude, tol=args.tol, fd_tol=args.fd_tol)
    try:
        cfg.validate()
    except ConfigError as exc:
        print(f"rackoid: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(cfg)
    _emit(report_json(report), args.report)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {report.suite}: {len(report.trials)} trials, max residual {report.max_residual:.3e}, "
          f"{report.wall_time_ms / 1000:.1f} s", file=sys.stderr)
    return EXIT_PASS if report.passed else EXIT_FAIL


def _converge(args) -> int:
    try:
        table = convergence_study(args.op, args.grids)
    except ConfigError as exc:
        print(f"rackoid: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(json.dumps(table, sort_keys=True, indent=2) + "\n", args.report)
    for row in table["table"]:
        order = "-" if row["order"] is None else f"{row['order']:.2f}"
        print(f"n={row['n']:5d}  residual={row['max_residual']:.3e}  order={order}", file=sys.stderr)
    slope = "undefined" if table["slope"] is None else f"{table['slope']:.3f}"
    print(f"slope {slope} {' '.join(table['flags'])}".rstrip(), file=sys.stderr)
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    if args.command == "converge":
        return _converge(args)
    for name, spec in SUITES.items():
        dims = ",".join(str(d) for d in sorted(spec.dims))
        geo = spec.geometry or "torus|chart"
        print(f"{name:22s} dim {dims:6s} {geo:12s} {spec.description}")
    return EXIT_PASS


if __name__ == "__main__":
    raise SystemExit(main())
