"""
Kernel ridge service for singlab.
Fits the canonical linear estimator a = (K + nλI)^{-1} Y with scikit-learn
and keeps the design, dual weights and kernel descriptor so predictions
Σ a_i k(x, X_i) can be reproduced after a save/load round trip.
"""

from typing import Any, Dict, Optional

import numpy as np
import structlog
from sklearn.kernel_ridge import KernelRidge
from sklearn.metrics.pairwise import laplacian_kernel, rbf_kernel

from models.config import KernelRidgeConfig
from models.errors import ParameterError
from models.functions import Dataset
from models.predictor import Predictor

logger = structlog.get_logger(__name__)

KERNELS = ("gaussian", "laplacian")
PREDICT_CHUNK = 4096


def kernel_gamma(kernel: str, bandwidth: float) -> float:
    """scikit-learn's gamma for k(x, y) = exp(−‖x−y‖²/(2h²)) or exp(−‖x−y‖₁/h)."""
    if bandwidth <= 0:
        raise ParameterError("kernel bandwidth must be positive")
    if kernel == "gaussian":
        return 1.0 / (2.0 * bandwidth ** 2)
    if kernel == "laplacian":
        return 1.0 / bandwidth
    raise ParameterError(f"unknown kernel {kernel!r}; choose from {', '.join(KERNELS)}")


def kernel_matrix(kernel: str, bandwidth: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    gamma = kernel_gamma(kernel, bandwidth)
    if kernel == "gaussian":
        return rbf_kernel(A, B, gamma=gamma)
    return laplacian_kernel(A, B, gamma=gamma)


class KernelRidgePredictor(Predictor):
    kind = "kernel-ridge"

    def __init__(self, design: np.ndarray, dual: np.ndarray, kernel: str, bandwidth: float, ridge: float,
                 domain, metadata: Optional[Dict[str, Any]] = None):
        super().__init__(domain, metadata)
        self.design = np.array(design, dtype=float)
        self.dual = np.array(dual, dtype=float).reshape(-1)
        self.kernel = kernel
        self.bandwidth = float(bandwidth)
        self.ridge = float(ridge)
        self.metadata.update(kernel=kernel, bandwidth=self.bandwidth, ridge=self.ridge)

    def descriptor(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "kernel": self.kernel,
            "bandwidth": self.bandwidth,
            "ridge": self.ridge,
            "domain": [list(self.domain[0]), list(self.domain[1])],
            "metadata": self.metadata,
        }

    def weights(self, points: np.ndarray) -> np.ndarray:
        """Υ_i(x) = Σ_j k(x, X_j) [(K + nλI)^{-1}]_{ji}; depends on the design only."""
        n = self.design.shape[0]
        gram = kernel_matrix(self.kernel, self.bandwidth, self.design, self.design)
        inverse = np.linalg.solve(gram + n * self.ridge * np.eye(n), np.eye(n))
        return kernel_matrix(self.kernel, self.bandwidth, points, self.design) @ inverse

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], PREDICT_CHUNK):
            block = points[start:start + PREDICT_CHUNK]
            out[start:start + PREDICT_CHUNK] = kernel_matrix(self.kernel, self.bandwidth, block, self.design) @ self.dual
        return out


def fit_kernel_ridge(data: Dataset, config: KernelRidgeConfig, bandwidth: Optional[float] = None,
                     ridge: Optional[float] = None) -> KernelRidgePredictor:
    bandwidth = config.bandwidth if bandwidth is None else bandwidth
    ridge = config.ridge if ridge is None else ridge
    if ridge <= 0:
        raise ParameterError(f"ridge λ must be positive, got {ridge}")
    if data.n < 1:
        raise ParameterError("kernel ridge needs at least one sample")

    # scikit-learn minimizes ‖Y − Ka‖² + alpha·aᵀKa, so alpha = nλ
    model = KernelRidge(alpha=data.n * ridge, kernel="rbf" if config.kernel == "gaussian" else "laplacian",
                        gamma=kernel_gamma(config.kernel, bandwidth))
    model.fit(data.X, data.Y)

    metadata = {"n": data.n, "seed": data.seed}
    logger.debug("kernel_ridge_fit_done", n=data.n, kernel=config.kernel, bandwidth=bandwidth, ridge=ridge)
    return KernelRidgePredictor(data.X, model.dual_coef_, config.kernel, bandwidth, ridge, data.domain, metadata)
