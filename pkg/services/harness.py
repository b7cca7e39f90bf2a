"""
Experiment harness for singlab.
Handles L² error measurement, rate sweeps over n (threads or celery),
log-log slope fitting, approximation sweeps over network size and the
DNN error decomposition check.
"""

import concurrent.futures
import math
from collections import Counter
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.stats import linregress

from models.activation import Activation
from models.config import FitConfig, TargetSpec
from models.errors import DomainError, InsufficientDataError, ParameterError, SinglabError
from models.predictor import DOMAIN_SLACK, Predictor
from models.results import ApproxReport, RateRow, RateTable, SweepCell
from services import constructor, estimators
from services.funcgen import gen_dataset, named_target, smooth_function, target_from_spec
from services.quadrature import DEFAULT_POINTS, DISCONTINUOUS_POINTS, MIN_POINTS, qmc_square_error
from services.rates import exponent_for, theoretical_rates
from services.rng import cell_seed

logger = structlog.get_logger(__name__)

# Mean errors at or below this are treated as exact (degenerate sweep).
FLOOR_ERROR = 1e-12
MIN_SLOPE_ROWS = 3
SMOOTH_DELTAS = (0.2, 0.1, 0.05, 0.025)
INDICATOR_EPS = (0.4, 0.28, 0.2, 0.14)
INDICATOR_PIECE = 1
CELERY_TIMEOUT = 3600
# Half-width of the accepted window around a reference slope.
SLOPE_WINDOW = 0.3


# --- error measurement --------------------------------------------------------

def default_points(target) -> int:
    return DISCONTINUOUS_POINTS if getattr(target, "J", 0) > 0 else DEFAULT_POINTS


def l2_error(predictor: Predictor, target, domain=None, points: Optional[int] = None) -> float:
    """Squared L²(P_X) error under the uniform design, by scrambled Halton QMC."""
    lower, upper = domain if domain is not None else (target.lower, target.upper)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != predictor.lower.shape or np.any(np.abs(lower - predictor.lower) > DOMAIN_SLACK) \
            or np.any(np.abs(upper - predictor.upper) > DOMAIN_SLACK):
        raise DomainError(f"{predictor.kind} predictor lives on {predictor.domain}, "
                          f"error requested on {(tuple(lower), tuple(upper))}")
    points = points or default_points(target)
    if points < MIN_POINTS:
        raise ParameterError(f"l2_error needs at least {MIN_POINTS} points")
    return qmc_square_error(predictor.predict, target, lower, upper, points).mean_square


# --- slope fitting --------------------------------------------------------------

def fit_slope(rows: Sequence[Tuple[float, float]]) -> Dict[str, Any]:
    """OLS of log(error) on log(x) over rows (x, error); rows with error <= 0 are dropped."""
    usable = [(x, e) for x, e in rows if x > 0 and e > 0 and math.isfinite(e)]
    excluded = len(rows) - len(usable)
    if excluded:
        logger.warning("slope_rows_excluded", excluded=excluded, reason="non-positive or non-finite error")
    if len(usable) < MIN_SLOPE_ROWS:
        raise InsufficientDataError(f"slope fit needs {MIN_SLOPE_ROWS} rows with positive error, got {len(usable)}")
    log_x = np.log([x for x, _ in usable])
    log_e = np.log([e for _, e in usable])
    if np.ptp(log_x) == 0:
        raise InsufficientDataError("slope fit needs at least two distinct x values")
    fit = linregress(log_x, log_e)
    return {"slope": float(fit.slope), "stderr": float(fit.stderr), "intercept": float(fit.intercept),
            "excluded": excluded}


def _finish_table(table: RateTable) -> RateTable:
    pairs = [(row.n, row.mean_error) for row in table.rows]
    updates: Dict[str, Any] = {
        "degenerate": bool(pairs) and all(e <= FLOOR_ERROR for _, e in pairs),
        "trend_ok": len(pairs) < 2 or pairs[-1][1] < pairs[0][1],
    }
    try:
        fitted = fit_slope(pairs)
        updates.update(slope=fitted["slope"], slope_stderr=fitted["stderr"], intercept=fitted["intercept"],
                       excluded_rows=fitted["excluded"])
    except InsufficientDataError as exc:
        logger.warning("slope_undefined", estimator=table.estimator, target=table.target, error=str(exc))
        updates["excluded_rows"] = sum(1 for _, e in pairs if e <= 0)
    if updates["degenerate"]:
        logger.warning("sweep_degenerate", estimator=table.estimator, target=table.target)
    if not updates["trend_ok"]:
        logger.warning("sweep_trend_flagged", estimator=table.estimator, target=table.target)
    return table.model_copy(update=updates)


# --- rate sweeps ------------------------------------------------------------------

def run_cell(payload: Dict[str, Any]) -> Dict[str, Any]:
    """One (n, rep) cell: fresh data, one fit per candidate, squared error per fit.

    The payload is plain JSON so the same function runs in a thread or a
    celery worker.
    """
    kind = payload["estimator"]
    spec = TargetSpec.model_validate(payload["target"])
    config = FitConfig.model_validate(payload["fit"])
    n, rep, seed = int(payload["n"]), int(payload["rep"]), int(payload["seed"])
    cell = SweepCell(n=n, rep=rep, seed=seed)
    try:
        target = target_from_spec(spec, int(payload["target_seed"]))
        data = gen_dataset(target, n, float(payload["sigma"]), seed)
        options = estimators.candidates(kind, config, n, spec)
    except SinglabError as exc:
        logger.error("sweep_cell_failed", n=n, rep=rep, error=str(exc))
        return cell.model_copy(update={"failed": True, "message": str(exc)}).model_dump()

    errors: List[Optional[float]] = []
    for candidate in options:
        try:
            predictor = estimators.fit(kind, data, config, seed, candidate.options)
            errors.append(l2_error(predictor, target, points=payload.get("points")))
        except Exception as exc:
            logger.error("sweep_fit_failed", n=n, rep=rep, candidate=candidate.label, error=str(exc))
            errors.append(None)
    failed = all(e is None for e in errors)
    logger.debug("sweep_cell_done", estimator=kind, n=n, rep=rep, errors=errors)
    return cell.model_copy(update={
        "errors": errors,
        "labels": [c.label for c in options],
        "failed": failed,
        "message": "every candidate failed" if failed else "",
    }).model_dump()


def _run_threads(payloads: List[Dict[str, Any]], workers: int) -> List[Dict[str, Any]]:
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run_cell, payloads))


def _run_celery(payloads: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    from tasks.sweep_tasks import run_sweep_cell_task

    pending = [run_sweep_cell_task.apply_async(args=[payload]) for payload in payloads]
    return [result.get(timeout=CELERY_TIMEOUT) for result in pending]


def _choose(cells: List[SweepCell], tune: str) -> Tuple[List[float], str]:
    """Error per usable replicate after candidate selection, and the chosen label."""
    usable = [c for c in cells if not c.failed]
    if not usable:
        return [], ""
    labels = usable[0].labels
    if tune == "per-rep":
        picked = []
        chosen = Counter()
        for cell in usable:
            scored = [(e, label) for e, label in zip(cell.errors, cell.labels) if e is not None]
            error, label = min(scored)
            picked.append(error)
            chosen[label] += 1
        return picked, chosen.most_common(1)[0][0]
    # per-n: the candidate with the lowest mean over replicates where it succeeded
    best_index, best_mean = None, math.inf
    for index in range(len(labels)):
        values = [c.errors[index] for c in usable if c.errors[index] is not None]
        if values and float(np.mean(values)) < best_mean:
            best_index, best_mean = index, float(np.mean(values))
    if best_index is None:
        return [], ""
    return [c.errors[best_index] for c in usable if c.errors[best_index] is not None], labels[best_index]


def rate_sweep(kind: str, spec: TargetSpec, config: FitConfig, n_grid: Sequence[int], reps: int, sigma: float,
               master_seed: int, points: Optional[int] = None, workers: int = 1,
               backend: str = "threads") -> RateTable:
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ParameterError("n grid must be strictly increasing")
    if reps < 1:
        raise ParameterError("reps must be >= 1")
    payloads = [
        {
            "estimator": kind,
            "target": spec.model_dump(),
            "fit": config.model_dump(),
            "target_seed": int(master_seed),
            "n": int(n),
            "rep": rep,
            "seed": cell_seed(master_seed, n, rep),
            "sigma": float(sigma),
            "points": points,
        }
        for n in n_grid for rep in range(reps)
    ]
    logger.info("rate_sweep_started", estimator=kind, target=spec.name, cells=len(payloads), backend=backend)
    raw = _run_celery(payloads) if backend == "celery" else _run_threads(payloads, workers)
    cells = sorted((SweepCell.model_validate(r) for r in raw), key=lambda c: (c.n, c.rep))

    rows: List[RateRow] = []
    failed_cells = 0
    for n in n_grid:
        group = [c for c in cells if c.n == n]
        errors, label = _choose(group, config.tune)
        failed = len(group) - len(errors)
        failed_cells += failed
        if not errors:
            logger.error("rate_row_empty", estimator=kind, n=n, failed=failed)
            continue
        stderr = float(np.std(errors, ddof=1) / np.sqrt(len(errors))) if len(errors) > 1 else 0.0
        rows.append(RateRow(n=n, reps=len(errors), mean_error=float(np.mean(errors)), stderr=stderr,
                            failed=failed, choice=label))

    table = RateTable(estimator=kind, target=spec.name, alpha=spec.alpha, beta=spec.beta, D=spec.dim,
                      rows=rows, failed_cells=failed_cells)
    try:
        rates = theoretical_rates(spec.alpha, spec.beta, spec.dim)
        reference = exponent_for(kind, rates)
        table = table.model_copy(update={"theoretical_exponent": reference["exponent"],
                                         "exponent_source": reference["source"], "flags": rates.flags()})
    except ParameterError as exc:
        logger.warning("theoretical_rates_unavailable", error=str(exc))
    table = _finish_table(table)
    logger.info("rate_sweep_done", estimator=kind, target=spec.name, slope=table.slope,
                theoretical=table.theoretical_exponent, failed=failed_cells)
    return table


def regress_once(kind: str, spec: TargetSpec, config: FitConfig, n: int, sigma: float, seed: int,
                 points: Optional[int] = None) -> Dict[str, Any]:
    """A single fit with the first candidate setting and its squared error."""
    target = target_from_spec(spec, seed)
    data = gen_dataset(target, n, sigma, seed)
    candidate = estimators.candidates(kind, config, n, spec)[0]
    predictor = estimators.fit(kind, data, config, seed, candidate.options)
    error = l2_error(predictor, target, points=points)
    logger.info("regress_done", estimator=kind, target=spec.name, n=n, error=error)
    return {"predictor": predictor, "data": data, "target": target, "error": error, "choice": candidate.label}


# --- approximation sweeps ---------------------------------------------------------

def approx_sweep(sweep: str, act: Activation, eps_grid: Optional[Iterable[float]] = None, alpha: float = 1.0,
                 beta: float = 2.0, D: int = 2, points: Optional[int] = None,
                 function: str = "smooth-sine") -> Tuple[RateTable, List[ApproxReport]]:
    """Measured L² error against measured S over a decreasing accuracy grid.

    `smooth` builds smooth_net for δ in the grid (reference slope −β/D);
    `indicator` builds the indicator of one graph-indicator piece for ε in
    the grid (reference slope −α/(2(D−1))).
    """
    if sweep == "smooth":
        grid = list(eps_grid or SMOOTH_DELTAS)
        exponent, source = beta / D, "smooth-approximation"
    elif sweep == "indicator":
        grid = list(eps_grid or INDICATOR_EPS)
        exponent, source = alpha / (2.0 * (D - 1)), "boundary-approximation"
    else:
        raise ParameterError(f"unknown sweep {sweep!r}; choose smooth or indicator")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("ε grid must be strictly decreasing")

    reports: List[ApproxReport] = []
    if sweep == "smooth":
        f = smooth_function(function, D, beta)
        region = (np.zeros(D), np.ones(D))
        for delta in grid:
            reports.append(constructor.smooth_net(f, beta, delta, region, act, points or DEFAULT_POINTS))
        target_name = function
    else:
        target = named_target("graph-indicator", 2, alpha, beta)
        D = target.dim
        count = points or DEFAULT_POINTS
        for eps in grid:
            net = constructor.piece_indicator_net(target.pieces, INDICATOR_PIECE, eps, act,
                                                  (target.lower, target.upper))
            measured = qmc_square_error(net, lambda x: target.indicator(INDICATOR_PIECE, x),
                                        target.lower, target.upper, count).l2
            reports.append(ApproxReport(builder="piece-indicator", network=net, target=target.name,
                                        claimed_bound=eps, measured_error=measured, grid_size=count,
                                        params={"eps": eps, "index": INDICATOR_PIECE},
                                        tolerance=constructor.QMC_TOLERANCE))
        target_name = target.name

    rows = [RateRow(n=max(1, r.network.metrics().sparsity), reps=1, mean_error=r.measured_error,
                    choice=";".join(f"{k}={v}" for k, v in sorted(r.params.items()) if k in ("delta", "eps")))
            for r in reports]
    table = RateTable(estimator=sweep, target=target_name, alpha=alpha, beta=beta, D=D, x_name="S",
                      error_kind="l2", rows=rows, theoretical_exponent=exponent, exponent_source=source)
    table = _finish_table(table)
    logger.info("approx_sweep_done", sweep=sweep, slope=table.slope, reference=-exponent)
    return table, reports


def decomposition_check(dnn: Predictor, target, approx: ApproxReport, points: Optional[int] = None,
                        tolerance: float = constructor.QMC_TOLERANCE) -> Dict[str, Any]:
    """DNN-ERM error at σ = 0 against the constructed approximator's error at matched size, plus the gap Δ̂."""
    dnn_error = l2_error(dnn, target, points=points)
    approx_error = approx.measured_error ** 2
    gap = float(dnn.metadata.get("gap", 0.0))
    holds = dnn_error <= approx_error + gap + tolerance
    if not holds:
        logger.warning("decomposition_violated", dnn_error=dnn_error, approx_error=approx_error, gap=gap)
    return {
        "dnn_error": dnn_error,
        "approx_error": approx_error,
        "gap": gap,
        "dnn_S": dnn.metadata.get("S"),
        "approx_S": approx.network.metrics().sparsity,
        "holds": holds,
    }


# --- report consolidation -----------------------------------------------------------


def consolidate(tables: Sequence[RateTable], window: float = SLOPE_WINDOW) -> List[Dict[str, Any]]:
    """One summary row per table: fitted slope against the reference exponent, pass/fail by window."""
    summary = []
    for table in sorted(tables, key=lambda t: (t.target, t.estimator)):
        table = _finish_table(table)
        exponent, source = table.theoretical_exponent, table.exponent_source
        if exponent is None:
            try:
                reference = exponent_for(table.estimator, theoretical_rates(table.alpha, table.beta, table.D))
                exponent, source = reference["exponent"], reference["source"]
            except ParameterError as exc:
                logger.warning("report_reference_missing", estimator=table.estimator, error=str(exc))
        passed = table.slope is not None and exponent is not None and abs(table.slope + exponent) <= window
        summary.append({
            "target": table.target,
            "estimator": table.estimator,
            "alpha": table.alpha,
            "beta": table.beta,
            "D": table.D,
            "rows": len(table.rows),
            "slope": table.slope,
            "slope_stderr": table.slope_stderr,
            "reference_slope": None if exponent is None else -exponent,
            "source": source,
            "window": window,
            "pass": passed,
        })
    return summary
