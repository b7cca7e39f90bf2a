"""
Deterministic integration oracles for every L² measurement in the lab:
scrambled Halton QMC (fixed scramble seed) on boxes, composite Simpson on
intervals, and dense-grid sup norms.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.stats import qmc

from models.errors import ParameterError

DEFAULT_POINTS = 2 ** 16
DISCONTINUOUS_POINTS = 2 ** 17
MIN_POINTS = 2 ** 10
SIMPSON_PANELS = 100_000
QMC_CHUNK = 8192

PointFn = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=16)
def _unit_halton(dim: int, count: int) -> np.ndarray:
    points = qmc.Halton(d=dim, scramble=True, seed=0).random(count)
    points.setflags(write=False)
    return points


def halton_points(dim: int, count: int, lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    if count < 1:
        raise ParameterError("point count must be positive")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    return lower + (upper - lower) * _unit_halton(dim, count)


@dataclass(frozen=True)
class QmcEstimate:
    mean_square: float
    volume: float
    points: int
    model_error: float

    @property
    def l2(self) -> float:
        """Lebesgue L² norm of the difference over the box."""
        return float(np.sqrt(self.volume * self.mean_square))


def qmc_square_error(fa: PointFn, fb: PointFn, lower, upper, points: int = DEFAULT_POINTS) -> QmcEstimate:
    """Mean of (fa − fb)² under the uniform law on the box.

    Shards are accumulated in index order and combined with numpy's
    pairwise summation, so the result does not depend on chunking of callers.
    """
    if points < MIN_POINTS:
        raise ParameterError(f"at least {MIN_POINTS} QMC points are required, got {points}")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    pts = halton_points(lower.size, points, lower, upper)
    sums, squares = [], []
    for start in range(0, points, QMC_CHUNK):
        block = pts[start:start + QMC_CHUNK]
        diff = np.asarray(fa(block), dtype=float).reshape(-1) - np.asarray(fb(block), dtype=float).reshape(-1)
        sq = diff * diff
        sums.append(sq.sum())
        squares.append((sq * sq).sum())
    mean = float(np.sum(sums) / points)
    variance = max(float(np.sum(squares) / points) - mean * mean, 0.0)
    return QmcEstimate(mean_square=mean, volume=float(np.prod(upper - lower)), points=points,
                       model_error=float(np.sqrt(variance / points)))


def simpson_square_error(fa: PointFn, fb: PointFn, lower: float, upper: float, panels: int = SIMPSON_PANELS) -> float:
    """∫ (fa − fb)² over [lower, upper] by composite Simpson (panels must be even)."""
    if panels % 2:
        panels += 1
    x = np.linspace(lower, upper, panels + 1)
    grid = x.reshape(-1, 1)
    diff = np.asarray(fa(grid), dtype=float).reshape(-1) - np.asarray(fb(grid), dtype=float).reshape(-1)
    return float(simpson(diff * diff, x=x))


def tensor_grid(lower: Sequence[float], upper: Sequence[float], per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def sup_error(fa: PointFn, fb: PointFn, points: np.ndarray) -> float:
    diff = np.asarray(fa(points), dtype=float).reshape(-1) - np.asarray(fb(points), dtype=float).reshape(-1)
    return float(np.max(np.abs(diff)))
