"""
Command-line front end for singlab.
Handles the construct, approx-sweep, regress, rate-sweep and report
subcommands: resolves the run configuration, dispatches to the services,
writes result files and a manifest per run.
"""

import argparse
import dataclasses
import sys
from typing import Any, Callable, Dict, List, Optional

import pandas as pd
import structlog
from dotenv import load_dotenv

from models.activation import make_activation
from models.config import RunConfig, resolve_config
from models.errors import BoundViolation, ConfigurationError, SinglabError
from models.results import RateTable
from services.constructor import NetworkBuilder
from services.harness import SLOPE_WINDOW, approx_sweep, consolidate, rate_sweep, regress_once
from services.logging_setup import configure_logging
from services.rates import theoretical_rates
from services.storage import ResultStore

__version__ = "1.0.0"
PROG = "singlab"

logger = structlog.get_logger(__name__)

# argparse destinations that are not configuration keys
NON_CONFIG = {"command", "config", "log_level", "log_json", "estimator"}


# --- argument parsing ---------------------------------------------------------

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat KEY=VALUE run file")
    parser.add_argument("--seed", type=int, help="master seed (default: SINGLAB_SEED or 0)")
    parser.add_argument("--output-dir", dest="output_dir", help="result directory (default: results)")
    parser.add_argument("--workers", type=int, help="sweep worker threads (default: 4)")
    parser.add_argument("--backend", choices=["threads", "celery"], help="sweep backend (default: threads)")
    parser.add_argument("--points", type=int, help="QMC points for error measurement (>= 1024)")
    parser.add_argument("--strict", action="store_true", default=None, help="exit 1 when a bound or window fails")
    parser.add_argument("--bound", type=float, help="claimed error bound, or slope window half-width for sweeps")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-json", dest="log_json", action="store_true", default=None, help="JSON log lines")
    parser.add_argument("--activation", help="relu, leaky-relu, affine-piecewise, sigmoid, softplus or swish")
    parser.add_argument("--slope", type=float, help="negative-side slope of leaky/affine activations")


def _target(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--target", help="graph-indicator, rectangle, haar-atom, quadrant, disk, smooth-sine, product, "
                                         "constant, zero or random")
    parser.add_argument("--alpha", type=float, help="boundary smoothness α (default 2)")
    parser.add_argument("--beta", type=float, help="piece smoothness β (default 2)")
    parser.add_argument("--dim", type=int, help="input dimension D (default 2)")
    parser.add_argument("--m-pieces", dest="m_pieces", type=int, help="pieces M of a random target")
    parser.add_argument("--j-boundaries", dest="j_boundaries", type=int, help="boundaries J of a random target")
    parser.add_argument("--radius", type=float, help="Hölder radius F of a random target")
    parser.add_argument("--value", type=float, help="value of the constant target")


def _fit(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma", type=float, help="noise standard deviation (default 0.1)")
    parser.add_argument("--tau", type=int, help="series truncation τ")
    parser.add_argument("--tau-grid", dest="tau_grid", help="candidate τ values, comma separated")
    parser.add_argument("--kernel", choices=["gaussian", "laplacian"])
    parser.add_argument("--bandwidth", type=float)
    parser.add_argument("--bandwidth-grid", dest="bandwidth_grid")
    parser.add_argument("--ridge", type=float, help="ridge λ (> 0)")
    parser.add_argument("--ridge-grid", dest="ridge_grid")
    parser.add_argument("--grid-size", dest="grid_size", type=int, help="curvelet frequency grid N")
    parser.add_argument("--delta1", type=int)
    parser.add_argument("--delta2", type=int)
    parser.add_argument("--width", type=int)
    parser.add_argument("--depth", type=int)
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--momentum", type=float)
    parser.add_argument("--restarts", type=int)
    parser.add_argument("--clip", type=float)
    parser.add_argument("--gap-target", dest="gap_target", type=float,
                        help="stop a DNN restart once its trailing loss decrease is below this")
    parser.add_argument("--budget-width", dest="budget_width", action="store_true", default=None,
                        help="scale DNN width with the sample-size budget")
    parser.add_argument("--tune", choices=["per-n", "per-rep"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, allow_abbrev=False,
                                     description="Piecewise-smooth approximation and convergence-rate lab")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    construct = commands.add_parser("construct", allow_abbrev=False, help="build one network and measure it")
    _common(construct)
    _target(construct)
    construct.add_argument("--builder", choices=NetworkBuilder.NAMES, help="construction to run (default mult)")
    for name, kind in (("m", int), ("T", float), ("dprime", int), ("gamma", int), ("eps", float),
                       ("eps1", float), ("eps2", float), ("t", int), ("side", float), ("delta", float),
                       ("index", int), ("h", float), ("axis", int), ("D", int)):
        construct.add_argument(f"--{name}", type=kind)
    construct.add_argument("--center", help="cube centre, comma separated")
    construct.add_argument("--function", help="smooth function for the smooth builder")
    construct.add_argument("--sign", choices=["+", "-"])
    construct.add_argument("--save", action="store_true", default=None, help="also write network.json")

    sweep = commands.add_parser("approx-sweep", allow_abbrev=False, help="error against network size")
    _common(sweep)
    _target(sweep)
    sweep.add_argument("--sweep", choices=["smooth", "indicator"])
    sweep.add_argument("--eps-grid", dest="eps_grid", help="strictly decreasing accuracies, comma separated")
    sweep.add_argument("--function", help="smooth function for the smooth sweep")
    sweep.add_argument("--no-plot", dest="plot", action="store_false", default=None)

    regress = commands.add_parser("regress", allow_abbrev=False, help="one fit and its squared L2 error")
    _common(regress)
    _target(regress)
    _fit(regress)
    regress.add_argument("--estimator", choices=["dnn", "kernel-ridge", "wavelet", "curvelet"])
    regress.add_argument("--n", type=int, help="sample size (default 1024)")
    regress.add_argument("--save", action="store_true", default=None, help="save predictor and dataset")

    rates = commands.add_parser("rate-sweep", allow_abbrev=False, help="error against n with slope fits")
    _common(rates)
    _target(rates)
    _fit(rates)
    rates.add_argument("--estimators", help="comma separated estimator kinds")
    rates.add_argument("--n-grid", dest="n_grid", help="strictly increasing sample sizes, comma separated")
    rates.add_argument("--reps", type=int)
    rates.add_argument("--no-plot", dest="plot", action="store_false", default=None)

    report = commands.add_parser("report", allow_abbrev=False, help="consolidate rate tables")
    _common(report)
    return parser


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {key: value for key, value in vars(args).items() if key not in NON_CONFIG and value is not None}
    if getattr(args, "estimator", None):
        flags["estimators"] = [args.estimator]
    return flags


# --- subcommands ------------------------------------------------------------------

def _manifest(store: ResultStore, config: RunConfig, extra: Optional[Dict[str, Any]] = None) -> None:
    store.write_manifest(config.command, config.model_dump(mode="json"), __version__, extra)


def _emit(rows: List[Dict[str, Any]]) -> None:
    sys.stdout.write(pd.DataFrame(rows).to_csv(index=False, lineterminator="\n"))


def _check_window(table: RateTable, window: float, violations: List[str]) -> None:
    if table.theoretical_exponent is None:
        return
    if table.slope is None or abs(table.slope + table.theoretical_exponent) > window:
        violations.append(f"{table.estimator}/{table.target}: slope {table.slope} outside "
                          f"{-table.theoretical_exponent:.3f} ± {window}")


def run_construct(config: RunConfig) -> None:
    store = ResultStore(config.output_dir)
    act = make_activation(config.activation, config.slope)
    params = {"target": config.target.name, "alpha": config.target.alpha, "beta": config.target.beta,
              "D": config.target.dim}
    params.update(config.builder_params)
    report = NetworkBuilder(act, config.points).build(config.builder, params)
    if config.bound is not None:
        report = dataclasses.replace(report, claimed_bound=config.bound)
    store.write_approx_reports("construct.csv", [report])
    if config.save:
        store.write_network(report)
    _manifest(store, config, {"within_bound": report.within_bound})
    _emit([report.to_row()])
    if config.strict and not report.within_bound:
        raise BoundViolation(f"{report.builder}: measured {report.measured_error:.6g} exceeds claimed "
                             f"{report.claimed_bound:.6g}")


def run_approx_sweep(config: RunConfig) -> None:
    store = ResultStore(config.output_dir)
    act = make_activation(config.activation, config.slope)
    table, reports = approx_sweep(config.sweep, act, config.eps_grid or None, config.target.alpha,
                                  config.target.beta, config.target.dim, config.points,
                                  str(config.builder_params.get("function", "smooth-sine")))
    store.write_approx_table(table, reports)
    if config.plot:
        store.plot_table(table, f"approx_{table.estimator}.svg")
    _manifest(store, config, {"slope": table.slope, "degenerate": table.degenerate})
    _emit([{"sweep": table.estimator, "slope": table.slope, "reference": -table.theoretical_exponent,
            "degenerate": table.degenerate}])
    if config.strict:
        violations: List[str] = []
        _check_window(table, config.bound or SLOPE_WINDOW, violations)
        if violations:
            raise BoundViolation("; ".join(violations))


def run_regress(config: RunConfig) -> None:
    store = ResultStore(config.output_dir)
    kind = config.estimators[0]
    result = regress_once(kind, config.target, config.fit, config.n, config.sigma, config.seed, config.points)
    predictor = result["predictor"]
    row = {"estimator": kind, "target": config.target.name, "n": config.n, "sigma": config.sigma,
           "seed": config.seed, "choice": result["choice"], "sq_err": result["error"]}
    for key in ("final_loss", "gap", "tau", "ridge", "bandwidth", "S"):
        if key in predictor.metadata:
            row[key] = predictor.metadata[key]
    store.write_rows("regress.csv", [row])
    if config.save:
        store.save_predictor(predictor)
        store.save_dataset(result["data"])
    _manifest(store, config, {"sq_err": result["error"]})
    _emit([row])
    if config.strict and config.bound is not None and result["error"] > config.bound:
        raise BoundViolation(f"{kind}: squared error {result['error']:.6g} exceeds {config.bound:.6g}")


def run_rate_sweep(config: RunConfig) -> None:
    store = ResultStore(config.output_dir)
    tables: List[RateTable] = []
    for kind in config.estimators:
        table = rate_sweep(kind, config.target, config.fit, config.n_grid, config.reps, config.sigma,
                           config.seed, config.points, config.workers, config.backend)
        store.write_rate_table(table, plot=config.plot)
        tables.append(table)

    comparison: Dict[str, Any] = {
        "estimators": {
            t.estimator: {
                "slope": t.slope,
                "theoretical_exponent": t.theoretical_exponent,
                "largest_n": t.rows[-1].n if t.rows else None,
                "largest_n_error": t.rows[-1].mean_error if t.rows else None,
                "failed_cells": t.failed_cells,
            }
            for t in tables
        },
    }
    try:
        comparison["flags"] = theoretical_rates(config.target.alpha, config.target.beta, config.target.dim).flags()
    except SinglabError:
        comparison["flags"] = {}
    ranked = [t for t in tables if t.rows]
    comparison["order"] = [t.estimator for t in sorted(ranked, key=lambda t: t.rows[-1].mean_error)]
    if len(tables) > 1:
        store.write_json("comparison.json", comparison)
    _manifest(store, config, {"slopes": {t.estimator: t.slope for t in tables}})
    _emit([{"estimator": t.estimator, "slope": t.slope, "theoretical_exponent": t.theoretical_exponent,
            "trend_ok": t.trend_ok, "failed_cells": t.failed_cells} for t in tables])
    if config.strict:
        violations: List[str] = []
        for table in tables:
            if not table.trend_ok:
                violations.append(f"{table.estimator}: error does not decrease with n")
            _check_window(table, config.bound or SLOPE_WINDOW, violations)
        if violations:
            raise BoundViolation("; ".join(violations))


def run_report(config: RunConfig) -> None:
    store = ResultStore(config.output_dir)
    paths = store.rate_table_paths()
    if not paths:
        raise ConfigurationError(f"no rate tables found in {config.output_dir}")
    tables = [store.read_rate_table(path) for path in paths]
    rows = consolidate(tables, config.bound or SLOPE_WINDOW)
    store.write_rows("report.csv", rows)
    _manifest(store, config, {"tables": len(tables)})
    _emit(rows)
    if config.strict and not all(row["pass"] for row in rows):
        raise BoundViolation("some slopes fall outside their windows")


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    "construct": run_construct,
    "approx-sweep": run_approx_sweep,
    "regress": run_regress,
    "rate-sweep": run_rate_sweep,
    "report": run_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_json)
    try:
        config = resolve_config(args.command, _flags(args), args.config)
        logger.info("run_started", command=config.command, seed=config.seed, output_dir=config.output_dir)
        COMMANDS[config.command](config)
    except SinglabError as exc:
        logger.error("run_failed", command=args.command, error=str(exc), exit_code=exc.exit_code)
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logger.info("run_finished", command=args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
