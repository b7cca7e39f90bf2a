"""
Curvelet series service for singlab (D = 2, domain [−1, 1]²).

The frame is realized on an N×N pixel grid with integer FFT frequencies.
Window (j, ℓ) is χ_{j,ℓ}(ξ) = ω_j(‖ξ‖)·(ν(2^j(θ − θ_ℓ)) + ν(2^j(θ + π − θ_ℓ))),
θ_ℓ = πℓ/2^j, with a squared dyadic-4 Meyer partition in the radius and
a squared-partition angular bump ν, so Σ χ² = φ(‖ξ‖/4^τ)². Scale 0 is a
single isotropic low-pass window.

A discrete atom with unit ℓ² norm becomes a continuum atom with unit
Lebesgue L² norm after scaling by N/2. The design law is uniform on a
square of area 4, hence ŵ_μ = (4/n)·Σ Y_i γ_μ(X_i).
"""

from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import fft

from models.config import CurveletConfig
from models.errors import ConfigurationError, DomainError, ParameterError
from models.functions import Dataset
from models.predictor import Predictor

logger = structlog.get_logger(__name__)

DOMAIN = ((-1.0, -1.0), (1.0, 1.0))
VOLUME = 4.0
WINDOW_FAMILY = "meyer-quintic"

Window = Tuple[int, int, np.ndarray]


def blend(s: np.ndarray) -> np.ndarray:
    """C² blender with β(0) = 0, β(1) = 1 and β(s) + β(1 − s) = 1."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def lowpass(r: np.ndarray) -> np.ndarray:
    """φ = 1 on [0, 1], Meyer roll-off on [1, 2], 0 beyond."""
    r = np.asarray(r, dtype=float)
    return np.where(r < 2.0, np.cos(0.5 * np.pi * blend(r - 1.0)), 0.0)


def radial_window(r: np.ndarray, j: int) -> np.ndarray:
    if j == 0:
        return lowpass(r)
    outer = lowpass(r / 4.0 ** j) ** 2
    inner = lowpass(r / 4.0 ** (j - 1)) ** 2
    return np.sqrt(np.clip(outer - inner, 0.0, None))


def angular_bump(t: np.ndarray) -> np.ndarray:
    """ν(t) = cos(π/2·β(|t|/π)) on [−π, π]; ν(t)² + ν(t − π)² = 1 on [0, π]."""
    t = np.abs(np.asarray(t, dtype=float))
    return np.where(t <= np.pi, np.cos(0.5 * np.pi * blend(t / np.pi)), 0.0)


def _wrap(theta: np.ndarray) -> np.ndarray:
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


def check_grid(grid_size: int, tau: int) -> None:
    if tau < 0:
        raise ParameterError("curvelet truncation τ must be >= 0")
    if grid_size % 2:
        raise ConfigurationError(f"curvelet grid size must be even, got {grid_size}")
    if 2 * 4 ** tau > grid_size // 2:
        raise ConfigurationError(
            f"frequency grid N={grid_size} is too small for τ={tau}: the outer band edge "
            f"2·4^τ={2 * 4 ** tau} exceeds the Nyquist radius {grid_size // 2}"
        )


@lru_cache(maxsize=8)
def frame_windows(grid_size: int, tau: int) -> Tuple[Window, ...]:
    """Every window χ_{j,ℓ} for j = 0..τ on the N×N integer frequency grid."""
    check_grid(grid_size, tau)
    freqs = fft.fftfreq(grid_size) * grid_size
    xi1, xi2 = np.meshgrid(freqs, freqs, indexing="ij")
    radius = np.hypot(xi1, xi2)
    theta = np.arctan2(xi2, xi1)

    windows: List[Window] = []
    base = radial_window(radius, 0)
    base.setflags(write=False)
    windows.append((0, 0, base))
    for j in range(1, tau + 1):
        omega = radial_window(radius, j)
        wedges = 2 ** j
        for ell in range(wedges):
            center = np.pi * ell / wedges
            chi = omega * (angular_bump(wedges * _wrap(theta - center))
                           + angular_bump(wedges * _wrap(theta + np.pi - center)))
            chi.setflags(write=False)
            windows.append((j, ell, chi))
    return tuple(windows)


def _filter(image: np.ndarray, chi: np.ndarray) -> np.ndarray:
    return np.real(fft.ifft2(chi * fft.fft2(image, norm="ortho"), norm="ortho"))


def analysis(image: np.ndarray, tau: int) -> np.ndarray:
    """Discrete frame coefficients, one N×N plane per window."""
    image = np.asarray(image, dtype=float)
    return np.stack([_filter(image, chi) for _, _, chi in frame_windows(image.shape[0], tau)])


def synthesis(planes: np.ndarray, tau: int) -> np.ndarray:
    """Adjoint of `analysis`; synthesis(analysis(g)) is g low-passed by φ(‖ξ‖/4^τ)²."""
    planes = np.asarray(planes, dtype=float)
    windows = frame_windows(planes.shape[-1], tau)
    spectrum = np.zeros(planes.shape[1:], dtype=complex)
    for plane, (_, _, chi) in zip(planes, windows):
        spectrum += chi * fft.fft2(plane, norm="ortho")
    return np.real(fft.ifft2(spectrum, norm="ortho"))


def pixel_index(x: np.ndarray, grid_size: int) -> np.ndarray:
    """Pixel of each point in [−1, 1]; x = 1 falls in the last pixel."""
    p = np.floor((np.asarray(x, dtype=float) + 1.0) * grid_size / 2.0).astype(int)
    return np.clip(p, 0, grid_size - 1)


def pixel_centers(grid_size: int) -> np.ndarray:
    return -1.0 + (np.arange(grid_size) + 0.5) * 2.0 / grid_size


def frame_size(tau: int, grid_size: int, delta1: int = 1, delta2: int = 1) -> int:
    """|L_τ|: number of curvelets kept after subsampling locations."""
    per_window = len(range(0, grid_size, delta1)) * len(range(0, grid_size, delta2))
    return (2 ** (tau + 1) - 1) * per_window


class CurveletPredictor(Predictor):
    kind = "curvelet"

    def __init__(self, coefficients: np.ndarray, tau: int, grid_size: int, delta1: int = 1, delta2: int = 1,
                 metadata: Optional[Dict[str, Any]] = None):
        super().__init__(DOMAIN, metadata)
        windows = frame_windows(grid_size, tau)
        coefficients = np.asarray(coefficients, dtype=float)
        expected = (len(windows), len(range(0, grid_size, delta1)), len(range(0, grid_size, delta2)))
        if coefficients.shape != expected:
            raise ParameterError(f"coefficient table shape {coefficients.shape} does not match {expected}")
        self.coefficients = coefficients
        self.tau = int(tau)
        self.grid_size = int(grid_size)
        self.delta1 = int(delta1)
        self.delta2 = int(delta2)
        self.metadata.update(tau=self.tau, grid_size=self.grid_size, delta1=self.delta1, delta2=self.delta2,
                             windows=WINDOW_FAMILY)
        self._image: Optional[np.ndarray] = None

    @property
    def window_index(self) -> List[Tuple[int, int]]:
        return [(j, ell) for j, ell, _ in frame_windows(self.grid_size, self.tau)]

    def image(self) -> np.ndarray:
        """Predicted value on every pixel of the grid."""
        if self._image is None:
            planes = np.zeros((self.coefficients.shape[0], self.grid_size, self.grid_size))
            planes[:, ::self.delta1, ::self.delta2] = self.coefficients * (self.delta1 * self.delta2)
            self._image = 0.5 * self.grid_size * synthesis(planes, self.tau)
            self._image.setflags(write=False)
        return self._image

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        image = self.image()
        return image[pixel_index(points[:, 0], self.grid_size), pixel_index(points[:, 1], self.grid_size)]

    def descriptor(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "tau": self.tau,
            "grid_size": self.grid_size,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "windows": WINDOW_FAMILY,
            "metadata": self.metadata,
        }

    def coefficient_rows(self) -> List[Tuple[int, int, int, int, float]]:
        rows = []
        for w, (j, ell) in enumerate(self.window_index):
            plane = self.coefficients[w]
            for (a, b), value in np.ndenumerate(plane):
                rows.append((j, ell, a * self.delta1, b * self.delta2, float(value)))
        return rows

    @classmethod
    def from_rows(cls, rows: Sequence[Tuple[int, int, int, int, float]], descriptor: Dict[str, Any]) -> "CurveletPredictor":
        tau, grid = int(descriptor["tau"]), int(descriptor["grid_size"])
        d1, d2 = int(descriptor.get("delta1", 1)), int(descriptor.get("delta2", 1))
        lookup = {(j, ell): w for w, (j, ell, _) in enumerate(frame_windows(grid, tau))}
        table = np.zeros((len(lookup), len(range(0, grid, d1)), len(range(0, grid, d2))))
        for j, ell, k1, k2, value in rows:
            table[lookup[(int(j), int(ell))], int(k1) // d1, int(k2) // d2] = value
        return cls(table, tau, grid, d1, d2, descriptor.get("metadata"))


def _check_square(data: Dataset) -> None:
    if data.dim != 2 or tuple(data.domain[0]) != DOMAIN[0] or tuple(data.domain[1]) != DOMAIN[1]:
        raise DomainError(f"curvelet fits need data on [−1, 1]², got D={data.dim} domain {data.domain}")


def response_image(data: Dataset, grid_size: int) -> np.ndarray:
    """E[p] = Σ_{i: X_i in pixel p} Y_i."""
    image = np.zeros((grid_size, grid_size))
    np.add.at(image, (pixel_index(data.X[:, 0], grid_size), pixel_index(data.X[:, 1], grid_size)),
              np.asarray(data.Y, dtype=float))
    return image


def _subsample(planes: np.ndarray, delta1: int, delta2: int) -> np.ndarray:
    return np.ascontiguousarray(planes[:, ::delta1, ::delta2])


def fit_curvelet(data: Dataset, config: CurveletConfig, tau: Optional[int] = None) -> CurveletPredictor:
    _check_square(data)
    tau = config.tau if tau is None else int(tau)
    check_grid(config.grid_size, tau)
    image = response_image(data, config.grid_size)
    planes = (2.0 * config.grid_size / data.n) * analysis(image, tau)
    coefficients = _subsample(planes, config.delta1, config.delta2)
    metadata = {"n": data.n, "seed": data.seed, "frame_size": frame_size(tau, config.grid_size,
                                                                          config.delta1, config.delta2)}
    logger.debug("curvelet_fit_done", n=data.n, tau=tau, grid_size=config.grid_size)
    return CurveletPredictor(coefficients, tau, config.grid_size, config.delta1, config.delta2, metadata)


def population_coefficients(f, tau: int, grid_size: int, delta1: int = 1, delta2: int = 1) -> np.ndarray:
    """w_μ = E[f(X) γ_μ(X)]·4 with f sampled at pixel centres (the n → ∞ limit of the fit)."""
    centers = pixel_centers(grid_size)
    g1, g2 = np.meshgrid(centers, centers, indexing="ij")
    values = np.asarray(f(np.column_stack([g1.ravel(), g2.ravel()])), dtype=float).reshape(grid_size, grid_size)
    planes = (2.0 / grid_size) * analysis(values, tau)
    return _subsample(planes, delta1, delta2)
