"""
Estimator dispatch for singlab.
Maps an estimator kind and a FitConfig to candidate settings and fitted
predictors, and checks the Y-superposition property of linear estimators.
"""

import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

from models.config import FitConfig, TargetSpec
from models.errors import ConfigurationError, ParameterError
from models.functions import Dataset
from models.predictor import KINDS, Predictor
from services import curvelet, dnn_erm, kernel_ridge, wavelet
from services.rates import dnn_width

logger = structlog.get_logger(__name__)

LINEAR_KINDS = ("kernel-ridge", "wavelet", "curvelet")


@dataclass(frozen=True)
class Candidate:
    kind: str
    label: str
    options: Dict[str, Any] = field(default_factory=dict)


def _dnn_candidates(fit: FitConfig, n: int, target: Optional[TargetSpec]) -> List[Candidate]:
    cfg = fit.dnn
    width = cfg.width
    if cfg.budget_width and target is not None:
        try:
            width = dnn_width(n, target.alpha, target.beta, target.dim, cfg.depth, max_width=cfg.max_width)
        except ParameterError as exc:
            logger.warning("dnn_budget_unavailable", error=str(exc), width=width)
    return [Candidate("dnn", f"width={width}", {"width": width})]


def candidates(kind: str, fit: FitConfig, n: int, target: Optional[TargetSpec] = None) -> List[Candidate]:
    """Settings the harness tries for one estimator; a single entry means no tuning."""
    if kind == "dnn":
        return _dnn_candidates(fit, n, target)
    if kind == "kernel-ridge":
        cfg = fit.kernel_ridge
        grid = itertools.product(cfg.bandwidth_grid or [cfg.bandwidth], cfg.ridge_grid or [cfg.ridge])
        return [Candidate(kind, f"h={h:g},lambda={lam:g}", {"bandwidth": h, "ridge": lam}) for h, lam in grid]
    if kind == "wavelet":
        cfg = fit.wavelet
        return [Candidate(kind, f"tau={tau}", {"tau": tau}) for tau in (cfg.tau_grid or [cfg.tau])]
    if kind == "curvelet":
        cfg = fit.curvelet
        usable = []
        for tau in cfg.tau_grid or [cfg.tau]:
            try:
                curvelet.check_grid(cfg.grid_size, tau)
            except ConfigurationError as exc:
                logger.warning("curvelet_candidate_skipped", tau=tau, error=str(exc))
                continue
            usable.append(Candidate(kind, f"tau={tau}", {"tau": tau}))
        if not usable:
            raise ConfigurationError(f"no curvelet truncation fits the N={cfg.grid_size} frequency grid")
        return usable
    raise ConfigurationError(f"unknown estimator {kind!r}; choose from {', '.join(KINDS)}")


def fit(kind: str, data: Dataset, config: FitConfig, seed: int = 0,
        options: Optional[Dict[str, Any]] = None) -> Predictor:
    options = dict(options or {})
    if kind == "dnn":
        return dnn_erm.fit_dnn_erm(data, config.dnn, seed, width=options.get("width"))
    if kind == "kernel-ridge":
        return kernel_ridge.fit_kernel_ridge(data, config.kernel_ridge, options.get("bandwidth"), options.get("ridge"))
    if kind == "wavelet":
        return wavelet.fit_wavelet(data, config.wavelet, options.get("tau"))
    if kind == "curvelet":
        return curvelet.fit_curvelet(data, config.curvelet, options.get("tau"))
    raise ConfigurationError(f"unknown estimator {kind!r}; choose from {', '.join(KINDS)}")


def predict(predictor: Predictor, x) -> np.ndarray:
    return predictor.predict(x)


def superposition_gap(kind: str, data: Dataset, other: np.ndarray, a: float, b: float,
                      config: FitConfig, options: Optional[Dict[str, Any]] = None,
                      points: Optional[np.ndarray] = None) -> float:
    """max |f̂[aY + bY′] − (a·f̂[Y] + b·f̂[Y′])| over the query points (the design by default)."""
    if kind not in LINEAR_KINDS:
        raise ParameterError(f"{kind} is not a linear estimator")
    other = np.asarray(other, dtype=float)
    query = data.X if points is None else np.asarray(points, dtype=float)
    first = fit(kind, data, config, options=options)
    second = fit(kind, data.with_response(other), config, options=options)
    mixed = fit(kind, data.with_response(a * np.asarray(data.Y) + b * other), config, options=options)
    expected = a * first.predict(query) + b * second.predict(query)
    return float(np.max(np.abs(mixed.predict(query) - expected)))
