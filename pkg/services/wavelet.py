"""
Haar wavelet series service for singlab.
Handles the truncated tensor Haar estimator on [0, 1]^D, the analytic Haar
coefficients of box indicators used as a population oracle, and the
Parseval energy certificate of a fitted coefficient table.

Per axis the columns are ordered scaling first, then (j, k) for
j = 0..τ and k = 0..2^j − 1, so column c ≥ 1 is (j, k) = (⌊log2 c⌋, c − 2^j)
and each axis carries 2^(τ+1) columns.
"""

import string
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.sparse.linalg import LinearOperator, eigsh

from models.config import WaveletConfig
from models.errors import DomainError, ParameterError
from models.functions import Dataset
from models.predictor import Predictor

logger = structlog.get_logger(__name__)

PREDICT_CHUNK = 4096
# Coefficient tables up to this size get a dense Gram spectrum.
DENSE_GRAM = 64
PARSEVAL_TOLERANCE = 1e-9


def axis_columns(tau: int) -> int:
    return 2 ** (tau + 1)


def column_index(column: int) -> Tuple[int, int]:
    """(j, k) of a per-axis column; the scaling function is (−1, 0)."""
    if column == 0:
        return -1, 0
    j = int(column).bit_length() - 1
    return j, column - 2 ** j


def haar_axis(x: np.ndarray, tau: int) -> np.ndarray:
    """(n, 2^(τ+1)) matrix of per-axis Haar functions at x ∈ [0, 1]; x = 1 falls in the last interval."""
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.zeros((x.size, axis_columns(tau)))
    out[:, 0] = 1.0
    rows = np.arange(x.size)
    for j in range(tau + 1):
        scale = 2 ** j
        k = np.minimum(np.floor(scale * x), scale - 1).astype(int)
        u = scale * x - k
        out[rows, scale + k] = np.where(u < 0.5, 1.0, -1.0) * np.sqrt(scale)
    return out


def _contract(tensor: np.ndarray, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Σ_c tensor[c_1..c_D] Π_d axes[d][i, c_d] for every row i."""
    letters = string.ascii_lowercase[:len(axes)]
    spec = f"{letters}," + ",".join(f"z{c}" for c in letters) + "->z"
    return np.einsum(spec, tensor, *axes, optimize=True)


def _spread(values: np.ndarray, axes: Sequence[np.ndarray]) -> np.ndarray:
    """Σ_i values[i] Π_d axes[d][i, c_d] as a D-way tensor."""
    letters = string.ascii_lowercase[:len(axes)]
    spec = "z," + ",".join(f"z{c}" for c in letters) + f"->{letters}"
    return np.einsum(spec, values, *axes, optimize=True)


class WaveletPredictor(Predictor):
    kind = "wavelet"

    def __init__(self, coefficients: np.ndarray, tau: int, domain=None, metadata: Optional[Dict[str, Any]] = None):
        coefficients = np.asarray(coefficients, dtype=float)
        dim = coefficients.ndim
        if domain is None:
            domain = ((0.0,) * dim, (1.0,) * dim)
        super().__init__(domain, metadata)
        if np.any(self.lower != 0.0) or np.any(self.upper != 1.0):
            raise DomainError("the Haar series lives on the unit cube [0, 1]^D")
        if any(size != axis_columns(tau) for size in coefficients.shape):
            raise ParameterError(f"coefficient table shape {coefficients.shape} does not match τ={tau}")
        self.coefficients = coefficients
        self.tau = int(tau)
        self.metadata["tau"] = self.tau

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], PREDICT_CHUNK):
            block = points[start:start + PREDICT_CHUNK]
            axes = [haar_axis(block[:, d], self.tau) for d in range(self.dim)]
            out[start:start + PREDICT_CHUNK] = _contract(self.coefficients, axes)
        return out

    def energy(self) -> float:
        return float(np.sum(self.coefficients ** 2))

    def coefficient_rows(self) -> List[Tuple[Tuple[int, ...], float]]:
        return [(tuple(int(i) for i in index), float(value)) for index, value in np.ndenumerate(self.coefficients)]

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[Sequence[int], float]], tau: int, dim: int,
                  metadata: Optional[Dict[str, Any]] = None) -> "WaveletPredictor":
        table = np.zeros((axis_columns(tau),) * dim)
        for index, value in rows:
            table[tuple(int(i) for i in index)] = value
        return cls(table, tau, metadata=metadata)


def _check_unit(data: Dataset) -> None:
    if np.any(np.asarray(data.domain[0]) != 0.0) or np.any(np.asarray(data.domain[1]) != 1.0):
        raise DomainError(f"wavelet fits need data on [0, 1]^D, got domain {data.domain}")


def wavelet_coefficients(data: Dataset, tau: int) -> np.ndarray:
    """ŵ = n^{-1} Σ_i Y_i Φ(X_i) over the truncated tensor index set."""
    if tau < 0:
        raise ParameterError("wavelet truncation τ must be >= 0")
    axes = [haar_axis(data.X[:, d], tau) for d in range(data.dim)]
    return _spread(np.asarray(data.Y, dtype=float), axes) / data.n


def fit_wavelet(data: Dataset, config: WaveletConfig, tau: Optional[int] = None) -> WaveletPredictor:
    _check_unit(data)
    tau = config.tau if tau is None else int(tau)
    coefficients = wavelet_coefficients(data, tau)
    metadata = {"n": data.n, "seed": data.seed, "coefficients": int(coefficients.size)}
    logger.debug("wavelet_fit_done", n=data.n, tau=tau, size=coefficients.size)
    return WaveletPredictor(coefficients, tau, data.domain, metadata)


def gram_lambda_max(data: Dataset, tau: int) -> float:
    """Largest eigenvalue of BᵀB/n for the tensor Haar design matrix B."""
    axes = [haar_axis(data.X[:, d], tau) for d in range(data.dim)]
    shape = (axis_columns(tau),) * data.dim
    size = int(np.prod(shape))

    def matvec(v: np.ndarray) -> np.ndarray:
        fitted = _contract(np.asarray(v, dtype=float).reshape(shape), axes)
        return _spread(fitted, axes).reshape(-1) / data.n

    if size <= DENSE_GRAM:
        gram = np.column_stack([matvec(e) for e in np.eye(size)])
        return float(np.linalg.eigvalsh(gram)[-1])
    operator = LinearOperator((size, size), matvec=matvec, dtype=float)
    return float(eigsh(operator, k=1, which="LA", v0=np.ones(size), return_eigenvectors=False)[0])


def parseval_certificate(predictor: WaveletPredictor, data: Dataset) -> Dict[str, Any]:
    """Σŵ² against λ_max(BᵀB/n)·n^{-1}ΣY²; λ_max → 1 as the design fills the cube."""
    energy = predictor.energy()
    mean_square = float(np.mean(np.asarray(data.Y) ** 2))
    lam = gram_lambda_max(data, predictor.tau)
    return {
        "energy": energy,
        "mean_square": mean_square,
        "lambda_max": lam,
        "holds": energy <= lam * mean_square + PARSEVAL_TOLERANCE,
    }


def _interval_overlap(lo: float, hi: float, a: float, b: float) -> float:
    return max(0.0, min(hi, b) - max(lo, a))


def haar_axis_integrals(lo: float, hi: float, tau: int) -> np.ndarray:
    """∫_lo^hi of every per-axis Haar column, exactly."""
    out = np.zeros(axis_columns(tau))
    out[0] = hi - lo
    for column in range(1, out.size):
        j, k = column_index(column)
        width = 2.0 ** -j
        a, mid, b = k * width, (k + 0.5) * width, (k + 1) * width
        out[column] = 2.0 ** (j / 2) * (_interval_overlap(lo, hi, a, mid) - _interval_overlap(lo, hi, mid, b))
    return out


def haar_box_coefficients(lower: Sequence[float], upper: Sequence[float], tau: int) -> np.ndarray:
    """Population coefficients ⟨1_box, Φ⟩ under the uniform law on [0, 1]^D."""
    lower = np.clip(np.asarray(lower, dtype=float), 0.0, 1.0)
    upper = np.clip(np.asarray(upper, dtype=float), 0.0, 1.0)
    table = np.ones(())
    for lo, hi in zip(lower, upper):
        table = np.multiply.outer(table, haar_axis_integrals(lo, hi, tau))
    return table
