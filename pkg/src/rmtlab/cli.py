"""``rmt`` command line front end.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 acceptance check failed.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .distributions import InvalidParameter, derive_seed, make_rng, parse_distribution
from .experiments import (
    DEFAULT_SEED,
    ExperimentConfig,
    ExperimentReport,
    compressible_kernel_probe,
    report_to_csv,
    run_trials,
    tail_table_and_fit,
    write_records_csv,
)
from .geometry import CompressParams, NetTooLarge, build_sparse_net, volumetric_bound, net_coverage, write_net_csv
from .lcd import LcdQuery, lcd_vector
from .linalg import generate_matrix, read_matrix_csv
from .plotting import FORMATS, render_report
from .smallball import rows_to_csv, smallball_compare
from .witness import certificate_json, verify_certificate, witness_certificate

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_CHECK = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _alpha(text: str):
    if text == "auto":
        return "auto"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("alpha must be a number or 'auto'") from None


def _common(p):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out")
    p.add_argument("--no-timestamp", action="store_true")
    p.add_argument("--config", help="flat 'key = value' file supplying defaults")


def _lcd_flags(p, tmax=10.0):
    p.add_argument("--r", type=float, default=0.1)
    p.add_argument("--alpha", type=_alpha, default="auto")
    p.add_argument("--tmax", type=float, default=tmax)
    p.add_argument("--step", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rmt", description="Smallest-singular-value laboratory.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("verify", help="Monte Carlo tail table and fitted constant")
    _common(p)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--n", type=_ints, default=[50])
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--eps", type=_floats, default=[0.1, 0.2, 0.3])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=FORMATS, default="json")
    p.add_argument("--records", help="CSV path for per-trial records")
    p.add_argument("--max-c", type=float, default=10.0)
    p.add_argument("--random-column", action="store_true")

    p = sub.add_parser("witness", help="witness certificate for one matrix")
    _common(p)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--matrix", help="CSV matrix file ('# rows cols' header)")

    p = sub.add_parser("lcd", help="essential least common denominator of a vector")
    _common(p)
    p.add_argument("--vector", type=_floats)
    p.add_argument("--vector-file")
    p.add_argument("--mode", choices=("fast", "oracle"), default="fast")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    _lcd_flags(p)

    p = sub.add_parser("smallball", help="empirical small-ball probability against the bound")
    _common(p)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--vector", type=_floats)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--eps", type=_floats, default=[0.01, 0.05, 0.1])
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--C", type=float, default=1.0)
    _lcd_flags(p)

    p = sub.add_parser("nets", help="net on sparse unit vectors")
    _common(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--probes", type=int, default=10_000)
    p.add_argument("--cap", type=float, default=1e7)

    p = sub.add_parser("probe", help="compressible kernel probe")
    _common(p)
    p.add_argument("--dist", default="gaussian")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--probes", type=int, default=10_000)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--rho", type=float, default=0.1)

    p = sub.add_parser("report", help="re-render a JSON report")
    _common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=FORMATS, default="svg")
    return parser


def _apply_config(parser, argv):
    """Re-parse with values from --config as defaults; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cp = configparser.ConfigParser()
    try:
        with open(args.config) as fh:
            cp.read_string("[rmt]\n" + fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    items = dict(cp["rmt"])
    flags = []
    for key, value in items.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            flags.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            flags += [flag, value]
    # config first so later command-line flags override
    return parser.parse_args([argv[0]] + flags + list(argv[1:]))


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stamp(args) -> str | None:
    return None if args.no_timestamp else datetime.now(timezone.utc).isoformat(timespec="seconds")


def cmd_verify(args) -> int:
    import time

    cfg = ExperimentConfig(
        distributions=[d for d in args.dist.split(",") if d],
        sizes=args.n,
        trials=args.trials,
        eps_grid=args.eps,
        master_seed=args.seed,
        workers=args.workers,
        random_column=args.random_column,
    )
    try:
        cfg.validate()
    except (ValueError, InvalidParameter) as exc:
        raise UsageError(str(exc)) from None
    if not cfg.eps_grid:
        raise UsageError("empty --eps grid")
    start = time.perf_counter()
    records = run_trials(cfg)
    report = tail_table_and_fit(records, cfg.eps_grid, cfg.echo())
    report.config["max_c"] = args.max_c
    report.wall_time_s = round(time.perf_counter() - start, 3)
    report.timestamp = _stamp(args)
    if args.records:
        write_records_csv(records, args.records, timestamp=not args.no_timestamp)
    if args.out:
        render_report(report, args.out, args.format, timestamp=not args.no_timestamp)
    elif args.format == "json":
        sys.stdout.write(report.to_json(timestamp=not args.no_timestamp))
    elif args.format == "csv":
        sys.stdout.write(report_to_csv(report))
    else:
        raise UsageError("--format svg needs --out")
    if report.c_hat > args.max_c:
        print(f"C_hat = {report.c_hat:g} exceeds --max-c {args.max_c:g}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_witness(args) -> int:
    if args.matrix:
        a = read_matrix_csv(args.matrix)
    else:
        a = generate_matrix(parse_distribution(args.dist), args.n, args.n, args.seed)
    cert = witness_certificate(a)
    report = None if cert.degenerate else verify_certificate(a, cert)
    _emit(certificate_json(cert, report) + "\n", args.out)
    return EXIT_OK if report is None or report.passed else EXIT_CHECK


def _read_vector(args) -> np.ndarray:
    if args.vector is not None:
        return np.array(args.vector)
    if args.vector_file:
        with open(args.vector_file) as fh:
            return np.array([float(v) for line in fh if not line.startswith("#") for v in line.replace(",", " ").split()])
    raise UsageError("lcd needs --vector or --vector-file")


def cmd_lcd(args) -> int:
    x = _read_vector(args)
    try:
        q = LcdQuery(args.alpha, args.r, args.tmax, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not np.any(x):
        raise UsageError("zero vector has no LCD")
    res = lcd_vector(x, q, args.mode)
    _emit((res.to_json() if args.format == "json" else res.csv_line()) + "\n", args.out)
    return EXIT_OK


def cmd_smallball(args) -> int:
    dist = parse_distribution(args.dist)
    if args.vector is not None:
        x = np.array(args.vector)
    else:
        x = make_rng(derive_seed(args.seed, 7)).standard_normal(args.n)
    x = x / np.linalg.norm(x)
    q = LcdQuery(args.alpha, args.r, args.tmax, args.step)
    rows = smallball_compare(x, dist, args.eps, q, args.samples, args.seed, args.C)
    _emit(rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_nets(args) -> int:
    p = CompressParams(args.delta, args.rho)
    try:
        net = build_sparse_net(args.n, p, args.seed, cap=args.cap)
    except NetTooLarge as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_RUNTIME
    if args.out:
        write_net_csv(net, args.out)
    summary = {
        "schema_version": 1,
        "n": args.n,
        "delta": args.delta,
        "rho": args.rho,
        "sparsity": p.budget(args.n),
        "cardinality": len(net),
        "volumetric_bound": volumetric_bound(args.n, args.delta, args.rho),
        "coverage": net_coverage(net, args.probes, derive_seed(args.seed, 1)),
        "seed": args.seed,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK if summary["cardinality"] <= summary["volumetric_bound"] else EXIT_CHECK


def cmd_probe(args) -> int:
    res = compressible_kernel_probe(parse_distribution(args.dist), args.n, args.probes, CompressParams(args.delta, args.rho), args.seed)
    payload = {"schema_version": 1, "dist": args.dist, "n": args.n, "minimum": res.minimum, "quantiles": res.quantiles, "probes": res.probes}
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    with open(args.input) as fh:
        report = ExperimentReport.from_dict(json.load(fh))
    if not report.cells:
        raise UsageError("report has an empty epsilon grid")
    if args.out is None:
        raise UsageError("report needs --out")
    render_report(report, args.out, args.format, timestamp=not args.no_timestamp)
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "witness": cmd_witness,
    "lcd": cmd_lcd,
    "smallball": cmd_smallball,
    "nets": cmd_nets,
    "probe": cmd_probe,
    "report": cmd_report,
}


def run_cli(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParameter, ValueError) as exc:
        print(f"rmt: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, InvalidParameter) else EXIT_RUNTIME
    except OSError as exc:
        print(f"rmt: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run_cli())
