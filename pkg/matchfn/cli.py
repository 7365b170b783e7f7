"""
Command-line entry point.

Usage:
    python -m matchfn diagnose --input panel.csv --outdir out/
    python -m matchfn estimate --input panel.csv --outdir out/ --baseline 2019-12
    python -m matchfn simulate --outdir synth/ --periods 500 --seed 3
    python -m matchfn validate --outdir check/ --alpha 0.7
    python -m matchfn estimate --config out/resolved_config.json

Option precedence: explicit flag, then ``--config`` file, then MATCHFN_*
environment variables, then built-in defaults.
"""

import argparse
import logging
import sys
from enum import IntEnum
from typing import Optional, Sequence

from .config import (
    GRID_SPANS,
    LOG_LEVELS,
    RunConfig,
    get_estimator_defaults,
    get_runtime_config,
)
from .errors import ConfigError, MatchFnError
from .ingest import ColumnSchema
from .kernel_cdf import CoordinateTransform
from .pipeline import run
from .synth import EfficiencyProcess

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    VALIDATION_FAILED = 1
    CONFIG = 2
    IO = 3
    ESTIMATION = 4


# RunConfig field -> argparse dest for the shared flags.
RUN_FLAGS = {
    "input": "input",
    "outdir": "outdir",
    "regions": "region",
    "bandwidth": "bandwidth",
    "transform": "transform",
    "grid_psi": "grid_psi",
    "grid_lambda": "grid_lambda",
    "psi_range": "psi_range",
    "lambda_range": "lambda_range",
    "grid_span": "grid_span",
    "base_point": "base_point",
    "window": "window",
    "intercept": "intercept",
    "baseline": "baseline",
    "seed": "seed",
    "charts": "charts",
}

# DgpConfig field -> argparse dest.
DGP_FLAGS = {
    "periods": "periods",
    "alpha": "alpha",
    "mu": "mu",
    "efficiency_process": "efficiency_process",
    "efficiency_sd": "efficiency_sd",
    "efficiency_rho": "efficiency_rho",
    "efficiency_drift": "efficiency_drift",
    "user_level": "user_level",
    "user_efficiency_loading": "user_loading",
    "user_rho": "user_rho",
    "user_sd": "user_sd",
    "vacancy_level": "vacancy_level",
    "vacancy_slope": "vacancy_slope",
    "vacancy_sd": "vacancy_sd",
    "noise_sd": "noise_sd",
    "cap_hires": "cap_hires",
    "start_period": "start_period",
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="FILE", help="Reload a resolved_config.json echo")
    shared.add_argument("--input", metavar="CSV", help="Input panel (UTF-8 CSV with header)")
    shared.add_argument("--outdir", metavar="DIR", help="Output directory (default: .)")
    shared.add_argument(
        "--region", action="append", metavar="NAME",
        help="Restrict to a region (repeatable)",
    )
    shared.add_argument("--bandwidth", type=float, help="Kernel bandwidth (default 0.01)")
    shared.add_argument(
        "--transform", choices=[t.value for t in CoordinateTransform],
        help="Coordinate transform for the kernel (default log-range)",
    )
    shared.add_argument("--grid-psi", type=int, help="psi grid points (default 200)")
    shared.add_argument("--grid-lambda", type=int, help="lambda grid points (default 60)")
    shared.add_argument("--psi-range", metavar="LOW:HIGH", help="psi range cap (default 0.05:20)")
    shared.add_argument("--lambda-range", metavar="LOW:HIGH", help="lambda range cap (default 0.05:20)")
    shared.add_argument(
        "--grid-span", choices=GRID_SPANS,
        help="Fit the grid to the data inside the caps, or use the full caps (default data)",
    )
    shared.add_argument("--base-point", metavar="median|YYYY-MM", help="Anchor observation (default median)")
    shared.add_argument("--window", type=int, help="Elasticity window in months; 0 = global (default 12)")
    shared.add_argument(
        "--intercept", action="store_true", default=None,
        help="Include an intercept in the elasticity projection",
    )
    shared.add_argument("--baseline", metavar="YYYY-MM", help="Period where the efficiency index is 1")
    shared.add_argument("--seed", type=int, help="Random seed for simulate/validate (default 1)")
    shared.add_argument(
        "--no-charts", dest="charts", action="store_false", default=None,
        help="Skip chart files",
    )
    for name in ColumnSchema().to_dict():
        shared.add_argument(f"--col-{name}", dest=f"col_{name}", metavar="COLUMN", help=f"Column holding {name}")
    shared.add_argument(
        "--log-level",
        choices=list(LOG_LEVELS),
        default=None,
        help="Logging level (default MATCHFN_LOG_LEVEL or INFO)",
    )

    dgp = argparse.ArgumentParser(add_help=False)
    group = dgp.add_argument_group("synthetic data")
    group.add_argument("--periods", type=int, help="Number of periods T (default 2000)")
    group.add_argument("--alpha", type=float, help="Cobb-Douglas exponent on A*U (default 0.5)")
    group.add_argument("--mu", type=float, help="Matching function scale (default 0.8)")
    group.add_argument(
        "--efficiency-process", choices=[p.value for p in EfficiencyProcess],
        help="Efficiency path (default log-random-walk)",
    )
    group.add_argument("--efficiency-sd", type=float, help="Efficiency shock sd (default 0.05)")
    group.add_argument("--efficiency-rho", type=float, help="log-ar1 persistence (default 0.98)")
    group.add_argument("--efficiency-drift", type=float, help="Log efficiency trend per period (default 0)")
    group.add_argument("--user-level", type=float, help="Mean users level (default 1000)")
    group.add_argument(
        "--user-loading", type=float,
        help="Exponent of efficiency in the users level (default 1)",
    )
    group.add_argument("--user-rho", type=float, help="Users AR(1) persistence (default 0.5)")
    group.add_argument("--user-sd", type=float, help="Users shock sd (default 0.02)")
    group.add_argument("--vacancy-level", type=float, help="Vacancies level (default 1000)")
    group.add_argument("--vacancy-slope", type=float, help="Elasticity of vacancies to users (default 2)")
    group.add_argument("--vacancy-sd", type=float, help="Vacancy shock sd (default 0.25)")
    group.add_argument("--noise-sd", type=float, help="Lognormal noise sd on hires (default 0)")
    group.add_argument(
        "--cap-hires", action="store_true", default=None,
        help="Cap hires at min(users, vacancies)",
    )
    group.add_argument("--start-period", metavar="YYYY-MM", help="First simulated period (default 2019-12)")

    parser = argparse.ArgumentParser(
        prog="matchfn",
        description="Nonparametric matching function estimation",
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser("diagnose", parents=[shared], help="Market ratios and trend charts")
    subparsers.add_parser("estimate", parents=[shared], help="Recover efficiency and elasticities")
    subparsers.add_parser("simulate", parents=[shared, dgp], help="Write a synthetic panel")
    subparsers.add_parser("validate", parents=[shared, dgp], help="Monte Carlo check against synthetic truth")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge defaults, the optional config file and explicit flags.

    Raises:
        ConfigError: invalid values or a config for another subcommand
    """
    defaults = get_estimator_defaults()
    data = {
        "subcommand": args.subcommand,
        "bandwidth": defaults.bandwidth,
        "transform": defaults.transform,
        "window": defaults.window,
    }

    if args.config:
        loaded = RunConfig.load(args.config).to_dict()
        if loaded["subcommand"] != args.subcommand:
            raise ConfigError(
                f"Config {args.config} is for '{loaded['subcommand']}', not '{args.subcommand}'"
            )
        data.update(loaded)

    for name, dest in RUN_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[name] = value

    columns = dict(data.get("columns") or ColumnSchema().to_dict())
    for name in ColumnSchema().to_dict():
        value = getattr(args, f"col_{name}", None)
        if value is not None:
            columns[name] = value
    data["columns"] = columns

    dgp = dict(data.get("dgp") or {})
    for name, dest in DGP_FLAGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            dgp[name] = value
    data["dgp"] = dgp

    return RunConfig.from_dict(data).validate()


# =============================================================================
# CLI ENTRY POINT
# =============================================================================

def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        runtime = get_runtime_config()
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.CONFIG

    # Configure logging
    logging.basicConfig(
        level=getattr(logging, args.log_level or runtime.log_level, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    try:
        config = resolve_config(args)
        result = run(config)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.CONFIG
    except OSError as e:
        print(f"error: [io] {e}", file=sys.stderr)
        return ExitCode.IO
    except MatchFnError as e:
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.ESTIMATION

    for path in result.outputs:
        print(f"wrote {path}")
    if result.subcommand == "validate":
        print((config.output_dir / "validation.txt").read_text(encoding="utf-8"), end="")
        if not result.passed:
            return ExitCode.VALIDATION_FAILED
    return ExitCode.OK


if __name__ == "__main__":
    sys.exit(main())
