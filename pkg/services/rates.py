"""
Rate calculators for singlab.
Closed-form squared-error exponents for DNN-ERM and the linear, wavelet and
curvelet floors, the covering and packing order calculators, the DNN size
budget used to scale network width with n, and the truncation levels and
lower bounds of the two series estimators.
"""

import math
from typing import Dict

from models.errors import ParameterError
from models.results import TheoreticalRates

# Dense-parameter ceiling is this many times the budget max(n^{D/(2β+D)}, n^{(D−1)/(α+D−1)}).
BUDGET_SCALE = 8.0
MIN_WIDTH = 2


def theoretical_rates(alpha: float, beta: float, D: int) -> TheoreticalRates:
    if alpha < 1 or beta < 1:
        raise ParameterError(f"rates need α, β >= 1, got α={alpha}, β={beta}")
    if D < 2:
        raise ParameterError(f"rates need D >= 2, got D={D}")
    smooth = 2.0 * beta / (2.0 * beta + D)
    boundary = alpha / (alpha + D - 1.0)
    return TheoreticalRates(
        alpha=alpha,
        beta=beta,
        D=D,
        dnn_exponent=min(smooth, boundary),
        dnn_smooth_exponent=smooth,
        dnn_boundary_exponent=boundary,
        linear_exponent=alpha / (2.0 * alpha + D - 1.0),
        linear_suboptimal=alpha < 2.0 * beta * (D - 1.0) / D,
        wavelet_active=beta > D / 2.0 and alpha > D - 1.0,
        curvelet_active=D == 2 and beta > D / 4.0 and alpha > (D - 1.0) / 2.0,
    )


def exponent_for(estimator: str, rates: TheoreticalRates) -> Dict[str, object]:
    """Exponent the measured squared-error slope is compared against, with its source tag."""
    if estimator == "dnn":
        return {"exponent": rates.dnn_exponent, "source": "dnn-upper"}
    if estimator == "kernel-ridge":
        return {"exponent": rates.linear_exponent, "source": "linear-floor"}
    if estimator == "wavelet":
        return {"exponent": rates.wavelet_exponent, "source": "wavelet-floor"}
    if estimator == "curvelet":
        return {"exponent": rates.curvelet_exponent, "source": "curvelet-floor"}
    raise ParameterError(f"unknown estimator {estimator!r}")


def covering_bound(L: int, S: int, B: float, eps: float) -> float:
    """log covering number of G(L, S, B): S·log(2·L·B^L·(S+1)^L/ε), evaluated in log space."""
    if L <= 0 or S <= 0 or B <= 0 or eps <= 0:
        raise ParameterError("covering bound needs L, S, B, ε > 0")
    return S * (math.log(2.0) + math.log(L) + L * math.log(B) + L * math.log(S + 1.0) - math.log(eps))


def packing_rate(eps: float, alpha: float, beta: float, D: int) -> float:
    """Order of the log packing number: ε^{−D/β} + ε^{−2α/(D−1)}."""
    if not 0 < eps <= 1:
        raise ParameterError(f"ε must lie in (0, 1], got {eps}")
    if D < 2 or alpha < 2 or beta < 2:
        raise ParameterError("packing rate needs D >= 2 and α, β >= 2")
    return eps ** (-D / beta) + eps ** (-2.0 * alpha / (D - 1.0))


def dnn_budget(n: int, alpha: float, beta: float, D: int) -> float:
    """Sparsity scale that balances approximation and complexity, without log factors."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    return max(n ** (D / (2.0 * beta + D)), n ** ((D - 1.0) / (alpha + D - 1.0)))


def dense_parameters(in_dim: int, width: int, depth: int) -> int:
    """Parameter count of a dense net with `depth` hidden layers of `width` units and a scalar output."""
    return (in_dim + 1) * width + (depth - 1) * (width + 1) * width + width + 1


def dnn_width(n: int, alpha: float, beta: float, D: int, depth: int,
              scale: float = BUDGET_SCALE, max_width: int = 256) -> int:
    """Widest dense net whose parameter count stays under scale·dnn_budget(n)."""
    ceiling = scale * dnn_budget(n, alpha, beta, D)
    width = MIN_WIDTH
    while width < max_width and dense_parameters(D, width + 1, depth) <= ceiling:
        width += 1
    return width


def optimal_wavelet_tau(n: int, D: int) -> int:
    """τ = ⌊log2(n)/(2D)⌋, balancing 2^{τD}/n against 2^{−τD}."""
    return max(0, int(math.floor(math.log2(max(n, 1)) / (2.0 * D))))


def optimal_curvelet_tau(n: int) -> int:
    """τ with 2^{3τ/2} ≈ n^{1/3}."""
    return max(0, int(math.floor(2.0 * math.log2(max(n, 1)) / 9.0)))


def wavelet_lower_bound(n: int, D: int, tau: int, sigma: float, c: float = 1.0) -> float:
    """2σ²2^{τD}/n + c^{2D}2^{−τD}; c is the straddling-coefficient constant."""
    return 2.0 * sigma ** 2 * 2.0 ** (tau * D) / n + c ** (2 * D) * 2.0 ** (-tau * D)


def curvelet_lower_bound(n: int, tau: int, sigma: float, c_tau: float = 1.0) -> float:
    """σ²c_τ(2^τ + 2^{3τ/2} − 1)/n + (3π/28)·2^{−3τ}."""
    return sigma ** 2 * c_tau * (2.0 ** tau + 2.0 ** (1.5 * tau) - 1.0) / n + 3.0 * math.pi / 28.0 * 2.0 ** (-3 * tau)
