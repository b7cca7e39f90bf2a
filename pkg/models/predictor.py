"""
Common base for fitted estimators.
A predictor knows its kind, the box it was fitted on and its fit metadata;
subclasses only supply the batch evaluation.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from models.errors import DomainError

# Slack allowed when checking that query points lie in the fitted domain.
DOMAIN_SLACK = 1e-12

KINDS = ("dnn", "kernel-ridge", "wavelet", "curvelet")


class Predictor(ABC):
    kind: str = ""

    def __init__(self, domain: Tuple[Sequence[float], Sequence[float]], metadata: Optional[Dict[str, Any]] = None):
        self.lower = np.asarray(domain[0], dtype=float)
        self.upper = np.asarray(domain[1], dtype=float)
        self.metadata: Dict[str, Any] = dict(metadata or {})

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def domain(self) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        return tuple(self.lower.tolist()), tuple(self.upper.tolist())

    def predict(self, x) -> np.ndarray:
        points = np.asarray(x, dtype=float)
        single = points.ndim == 1
        if single:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise DomainError(f"{self.kind} predictor expects points of dimension {self.dim}, got shape {np.shape(x)}")
        outside = np.any(points < self.lower - DOMAIN_SLACK, axis=1) | np.any(points > self.upper + DOMAIN_SLACK, axis=1)
        if np.any(outside):
            raise DomainError(f"{int(outside.sum())} query points lie outside the {self.kind} domain "
                              f"{self.domain[0]}..{self.domain[1]}")
        values = self._evaluate(points)
        return values[0] if single else values

    def __call__(self, x) -> np.ndarray:
        return self.predict(x)

    @abstractmethod
    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at an (n, D) batch of in-domain points."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}(kind={self.kind}, D={self.dim})"
