"""Command-line front end: ``gaplab <command> [flags]``."""

import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence

from dotenv import load_dotenv

from .config import MODELS as MODEL_TAGS, ExperimentConfig, load_config, parse_float_list
from .csvio import dumps
from .errors import ConfigError, GapLabError, UnknownModelError
from .expansions import RhoConvention
from .lab import ExperimentResult, GapLab
from .plotscript import emit_plot_script

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "GAPLAB_LOG_LEVEL"
USAGE_ERROR = 2


def configure_logging(verbose: bool = False) -> None:
    """Set up the root handler once, from GAPLAB_LOG_LEVEL (default WARNING) or --verbose."""
    level_name = "INFO" if verbose else os.getenv(LOG_LEVEL_ENV, "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("gaplab").setLevel(level)


def _float_list(raw: str) -> tuple:
    try:
        return parse_float_list(raw)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(e.reason)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("experiment settings (override --config)")
    group.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    group.add_argument("--model", choices=MODEL_TAGS, help="expansion family (default: mmn-hw)")
    group.add_argument("--n", type=float, help="single arrival scale n")
    group.add_argument("--n-grid", type=_float_list, help="comma separated arrival scales (default: per model)")
    group.add_argument("--mu", type=float, help="service rate (default: 1)")
    group.add_argument("--gamma", type=float, help="abandonment rate of exponential patience")
    group.add_argument("--h", type=float, help="waiting cost per customer per unit time (default: 1)")
    group.add_argument("--c", type=float, help="cost per server per unit time (default: 1)")
    group.add_argument("--alpha", type=float, help="delay-probability target of the constrained report")
    group.add_argument("--x", type=_float_list, help="comma separated probe points (default: 0.5,1,2)")
    group.add_argument("--refined", action="store_true", default=None, help="also evaluate the refined prescription")
    group.add_argument(
        "--rho-convention",
        choices=[c.value for c in RhoConvention],
        help="rho in the fluid correction (default: utilization)",
    )
    group.add_argument("--patience", help="exp:GAMMA or hyperexp:P,A,B")
    group.add_argument("--delta", type=float, help="neighbourhood radius of the residual probe (default: 0.05)")
    group.add_argument("--window", type=int, help="Erlang-A integer search window")
    group.add_argument("--workers", type=int, help="threads for per-n evaluation (default: 1)")
    group.add_argument("--out", metavar="PATH", help="output CSV (default: stdout)")
    group.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaplab",
        description="Optimality gaps of asymptotic staffing prescriptions.",
        epilog=f"Logging verbosity is read from {LOG_LEVEL_ENV} (default WARNING).",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    commands.add_parser("prescribe", parents=[common], help="select x_star and print the staffing it prescribes")
    commands.add_parser("evaluate", parents=[common], help="prescription, exact gaps and condition probes")
    commands.add_parser("gap-table", parents=[common], help="CSV of optimality gaps over the n-grid")
    commands.add_parser("approx-check", parents=[common], help="CSV of expansion residuals over the n-grid")
    commands.add_parser("constrained", parents=[common], help="CSV of the constrained-staffing report")
    plot = commands.add_parser("plot-script", help="write a matplotlib script for an experiment CSV")
    plot.add_argument("csv", help="CSV produced by gap-table, approx-check or constrained")
    plot.add_argument("--out", metavar="PATH", help="script path (default: <csv>_plot.py)")
    plot.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Merge --config file values with explicit flags."""
    overrides: Dict[str, Any] = {
        key: getattr(args, key)
        for key in (
            "model", "n_grid", "mu", "gamma", "h", "c", "alpha", "x", "refined",
            "patience", "delta", "window", "workers", "out",
        )
    }
    if args.n is not None:
        overrides["n_grid"] = (args.n,)
    if args.rho_convention is not None:
        overrides["rho_convention"] = RhoConvention(args.rho_convention)
    return load_config(args.config, overrides)


def _print_report(report: Dict[str, Any], stream) -> None:
    for key, value in report.items():
        if key == "gaps":
            print("gaps:", file=stream)
            for record in value:
                print(
                    f"  n={record.n:g} {record.variant}: staffing={record.staffing_prescribed:.6g} "
                    f"cost={record.cost_prescribed:.10g} optimum={record.staffing_optimal:.6g} "
                    f"cost*={record.cost_optimal:.10g} gap={record.gap:.6g} "
                    f"flags={';'.join(record.flags) or '-'}",
                    file=stream,
                )
        elif key == "conditions":
            print("conditions:", file=stream)
            for condition, verdict, evidence in value:
                print(f"  {condition}: {verdict} ({evidence})", file=stream)
        elif isinstance(value, dict):
            print(f"{key}:", file=stream)
            for n, v in value.items():
                print(f"  n={n:g}: {v:.10g}", file=stream)
        else:
            print(f"{key}: {value}", file=stream)


def _emit(result: ExperimentResult) -> None:
    if result.path is None:
        sys.stdout.write(dumps(result.schema, result.rows))
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    if result.warnings:
        print(f"warning: {result.warnings} flagged rows", file=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit status (2 on usage errors, else 0)."""
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    try:
        if args.command == "plot-script":
            path = emit_plot_script(args.csv, args.out)
            print(path)
            return 0
        config = config_from_args(args)
        logger.debug("%s with %r", args.command, config)
        lab = GapLab(config, verbose=args.verbose)
        if args.command == "prescribe":
            _print_report(lab.prescribe(), sys.stdout)
        elif args.command == "evaluate":
            _print_report(lab.evaluate(), sys.stdout)
        elif args.command == "gap-table":
            _emit(lab.run_gap_table())
        elif args.command == "approx-check":
            _emit(lab.run_approx_check())
        elif args.command == "constrained":
            _emit(lab.run_constrained_report())
    except (ConfigError, UnknownModelError) as e:
        print(f"gaplab {args.command}: error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except GapLabError as e:
        # the experiment itself could not be carried out; reported, not a usage error
        print(f"gaplab {args.command}: warning: {e}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
