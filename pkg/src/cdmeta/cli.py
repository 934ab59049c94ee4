"""Command line interface.

Exit codes: 0 success, 1 input error (bad file, bad flag, bad data),
2 numeric failure.  Errors go to stderr as a one-line JSON object so callers
can parse failures without scraping text.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import InputError, NumericError
from .io import (
    ALL_METHODS,
    AnalysisOptions,
    analyze,
    parse_sim_config,
    parse_studies,
    report_to_csv,
    report_to_json,
    sim_results_to_csv,
    tau2_report,
)
from .model import Method
from .simharness import run_scenario

METHOD_CHOICES = [m.value for m in Method]


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; that code is reserved
    # for numeric failures here, so usage problems become input errors.
    def error(self, message):
        raise InputError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdmeta", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="run estimators on a study CSV")
    p_analyze.add_argument("csv", type=Path, help="CSV with columns study,estimate,se")
    p_analyze.add_argument("--level", type=float, default=0.95)
    p_analyze.add_argument(
        "--samples", type=int, default=100_000, metavar="B",
        help="Monte Carlo draws for the sampled marginal (default 100000)",
    )
    p_analyze.add_argument("--seed", type=int, default=None)
    p_analyze.add_argument(
        "--method", action="append", choices=METHOD_CHOICES, default=None,
        help="restrict to this method (repeatable; default: all)",
    )
    p_analyze.add_argument("--curves", action="store_true", help="export p-value curves")
    p_analyze.add_argument("--curve-grid", type=int, default=201)
    p_analyze.add_argument(
        "--prob-below", type=float, default=None, metavar="X",
        help="also report the confidence probability P(mu < X) per method",
    )
    p_analyze.add_argument("--gaq-tol", type=float, default=1e-6)
    p_analyze.add_argument("--out", choices=["json", "csv"], default="json")

    p_tau2 = sub.add_parser("tau2", help="heterogeneity confidence distribution")
    p_tau2.add_argument("csv", type=Path)
    p_tau2.add_argument("--level", type=float, default=0.95)
    p_tau2.add_argument("--density-grid", type=int, default=201)
    p_tau2.add_argument(
        "--upper", type=float, default=None,
        help="grid upper bound (default: smallest 1-2-5 bound holding 95% of the CD)",
    )
    p_tau2.add_argument("--out", choices=["json", "csv"], default="json")

    p_sim = sub.add_parser("simulate", help="run a scenario-grid simulation")
    p_sim.add_argument("config", type=Path, help="key=value scenario grid file")
    p_sim.add_argument("--out", choices=["csv"], default="csv")
    p_sim.add_argument("--workers", type=int, default=1)

    sub.add_parser("version", help="print version and exit")
    return parser


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _cmd_analyze(args) -> str:
    ma = parse_studies(_read_text(args.csv))
    options = AnalysisOptions(
        level=args.level,
        b=args.samples,
        methods=tuple(Method(m) for m in args.method) if args.method else ALL_METHODS,
        seed=args.seed,
        curves=args.curves,
        curve_grid=args.curve_grid,
        prob_below=args.prob_below,
        gaq_tol=args.gaq_tol,
    )
    report = analyze(ma, options)
    return report_to_json(report) if args.out == "json" else report_to_csv(report)


def _cmd_tau2(args) -> str:
    ma = parse_studies(_read_text(args.csv))
    report = tau2_report(ma, level=args.level, grid_size=args.density_grid, upper=args.upper)
    if args.out == "json":
        return report_to_json(report)
    lines = ["tau2,density,cdf"]
    for t, d, c in zip(report["grid"], report["density"], report["cdf"]):
        lines.append(f"{t:.6g},{d:.6g},{c:.6g}")
    return "\n".join(lines) + "\n"


def _cmd_simulate(args) -> str:
    scenarios, options = parse_sim_config(_read_text(args.config))
    if args.workers < 1:
        raise InputError("--workers must be >= 1")
    results = [
        run_scenario(
            scenario,
            options["methods"],
            level=options["level"],
            workers=args.workers,
        )
        for scenario in scenarios
    ]
    return sim_results_to_csv(results)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "version":
            output = __version__ + "\n"
        elif args.command == "analyze":
            output = _cmd_analyze(args)
        elif args.command == "tau2":
            output = _cmd_tau2(args)
        else:
            output = _cmd_simulate(args)
    except InputError as exc:
        sys.stderr.write(json.dumps({"error": {"type": "input", "message": str(exc)}}) + "\n")
        return 1
    except NumericError as exc:
        sys.stderr.write(json.dumps({"error": {"type": "numeric", "message": str(exc)}}) + "\n")
        return 2
    sys.stdout.write(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
