"""
Function-class generators for singlab.

Handles random members of Hölder balls, random piece partitions, the named
closed-form targets used by the experiments, and synthetic regression data
Y = f*(X) + ξ under the uniform design.
"""

import itertools
from typing import Optional, Sequence, Tuple

import numpy as np
import structlog

from models.config import TargetSpec
from models.errors import ParameterError
from models.functions import (
    Boundary,
    Dataset,
    HolderFn,
    PieceSpec,
    PiecewiseSmoothFn,
    all_sign_tuples,
    constant_fn,
    cosine_series,
    make_dataset,
    polynomial,
)
from services.rng import derive_seed, stream

logger = structlog.get_logger(__name__)

COSINE_CUTOFF = 8
BOUNDARY_CENTER = 0.5
BOUNDARY_HALF_WIDTH = 0.3

NAMED_TARGETS = (
    "graph-indicator",
    "rectangle",
    "haar-atom",
    "quadrant",
    "disk",
    "smooth-sine",
    "product",
    "constant",
    "zero",
)
ALIASES = {"rectangle-(2/3)^D": "rectangle", "quadrant-[-1,1]^2": "quadrant", "quadrant-[−1,1]²": "quadrant"}


def sample_holder(seed: int, beta: float, F: float, D: int, cutoff: int = COSINE_CUTOFF) -> HolderFn:
    """Random cosine series in the Hölder ball of smoothness beta and radius F.

    Coefficients decay like (1 + |k|)^{-(beta + D/2 + 1)}; the series is
    divided by the absolute coefficient sum so |f| <= F everywhere, not just
    on a sample grid.
    """
    if beta <= 0 or F <= 0 or D < 1:
        raise ParameterError("sample_holder needs beta > 0, F > 0, D >= 1")
    rng = stream(seed, "coefficients")
    freqs = np.array(list(itertools.product(range(cutoff + 1), repeat=D)), dtype=float)
    decay = (1.0 + np.linalg.norm(freqs, axis=1)) ** -(beta + D / 2.0 + 1.0)
    coefs = rng.uniform(-1.0, 1.0, size=freqs.shape[0]) * decay
    total = float(np.abs(coefs).sum())
    amps = F * coefs / total if total > 0 else coefs
    return cosine_series(freqs, amps, beta=beta, radius=F, name=f"holder-{seed}")


def make_pieces(seed: int, alpha: float, F: float, J: int, M: int, D: int) -> PieceSpec:
    if J < 0 or D < 2:
        raise ParameterError("pieces need J >= 0 and D >= 2")
    if not 1 <= M <= 2 ** J:
        raise ParameterError(f"M must satisfy 1 <= M <= 2^J, got M={M}, J={J}")
    rng = stream(seed, "partition")
    boundaries = []
    for j in range(J):
        raw = sample_holder(derive_seed(seed, "partition", j), alpha, F, D - 1)
        boundary = raw.scaled(BOUNDARY_HALF_WIDTH / F, BOUNDARY_CENTER)
        boundaries.append(Boundary(axis=int(rng.integers(0, D)), fn=boundary))

    tuples = all_sign_tuples(J)
    order = rng.permutation(len(tuples))
    groups = [[] for _ in range(M)]
    for position, index in enumerate(order):
        owner = position if position < M else int(rng.integers(0, M))
        groups[owner].append(tuples[index])
    groups = tuple(tuple(sorted(g)) for g in groups)
    return PieceSpec(dim=D, boundaries=tuple(boundaries), groups=groups, alpha=alpha)


def random_target(seed: int, alpha: float, beta: float, F: float, J: int, M: int, D: int) -> PiecewiseSmoothFn:
    pieces = make_pieces(seed, alpha, F, J, M, D)
    functions = tuple(sample_holder(derive_seed(seed, "coefficients", m), beta, F, D) for m in range(M))
    return PiecewiseSmoothFn(pieces, functions, alpha, beta, F, _unit_domain(D), name=f"random-{seed}")


def eval_piecewise(f: PiecewiseSmoothFn, x) -> np.ndarray:
    return f(x)


def _unit_domain(D: int) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    return (0.0,) * D, (1.0,) * D


def _single_piece(fn: HolderFn, alpha: float, beta: float, name: str, domain=None) -> PiecewiseSmoothFn:
    D = fn.dim
    pieces = PieceSpec(dim=D, boundaries=(), groups=(((),),), alpha=alpha)
    return PiecewiseSmoothFn(pieces, (fn,), alpha, beta, max(fn.radius, 1.0), domain or _unit_domain(D), name=name)


def smooth_function(name: str, D: int = 2, beta: float = 2.0, seed: int = 0, value: float = 1.0) -> HolderFn:
    """Globally smooth targets used by the smooth-approximation builders."""
    if name in ("smooth-sine", "product") and D < 2:
        raise ParameterError(f"{name} couples two coordinates and needs D >= 2, got D={D}; use \"sine\" in one dimension")
    if name == "smooth-sine":
        freq = [1.0, 1.0] + [0.0] * (D - 2)
        phase = [np.pi / 2, 0.0] + [0.0] * (D - 2)
        return cosine_series([freq], [1.0], [phase], beta=beta, radius=1.0, name=name)
    if name == "sine":
        freq = [1.0] + [0.0] * (D - 1)
        phase = [np.pi / 2] + [0.0] * (D - 1)
        return cosine_series([freq], [1.0], [phase], beta=beta, radius=1.0, name=name)
    if name == "product":
        return polynomial({tuple([1, 1] + [0] * (D - 2)): 1.0}, D, beta, radius=1.0, name=name)
    if name == "constant":
        return constant_fn(value, D, beta)
    if name == "zero":
        return constant_fn(0.0, D, beta)
    if name == "random":
        return sample_holder(seed, beta, 1.0, D)
    raise ParameterError(f"unknown smooth function: {name}")


def graph_boundary(alpha: float = 2.0) -> HolderFn:
    """h(x1) = 0.4 + 0.2 sin(2π x1)."""
    return cosine_series([[2.0]], [0.2], [[np.pi / 2]], offset=0.4, beta=alpha, radius=0.6, name="sine-graph")


def named_target(name: str, D: int = 2, alpha: float = 2.0, beta: float = 2.0, value: float = 1.0) -> PiecewiseSmoothFn:
    """Fixed targets on the unit cube (the quadrant lives on [-1, 1]^2).

    The disk boundaries are closed-form half circles with no derivative
    oracle, so building networks for "disk" needs alpha <= 1 (zero-degree
    local Taylor pieces); with the default alpha = 2 the builders raise
    MissingDerivativeError. Sampling and the linear estimators accept any alpha.
    """
    name = ALIASES.get(name, name)
    one = lambda dim: constant_fn(1.0, dim, beta)
    zero = lambda dim: constant_fn(0.0, dim, beta)

    if name == "graph-indicator":
        pieces = PieceSpec(2, (Boundary(1, graph_boundary(alpha)),), ((("-",),), (("+",),)), alpha)
        return PiecewiseSmoothFn(pieces, (zero(2), one(2)), alpha, beta, 1.0, _unit_domain(2), name=name)

    if name == "rectangle":
        edge = constant_fn(2.0 / 3.0, D - 1, alpha)
        boundaries = tuple(Boundary(d, edge) for d in range(D))
        inside = ("-",) * D
        rest = tuple(t for t in all_sign_tuples(D) if t != inside)
        pieces = PieceSpec(D, boundaries, ((inside,), rest), alpha)
        return PiecewiseSmoothFn(pieces, (one(D), zero(D)), alpha, beta, 1.0, _unit_domain(D), name=name)

    if name == "haar-atom":
        # [0, 1/2]^D, one cell of the level-zero Haar grid
        edge = constant_fn(0.5, D - 1, alpha)
        boundaries = tuple(Boundary(d, edge) for d in range(D))
        inside = ("-",) * D
        rest = tuple(t for t in all_sign_tuples(D) if t != inside)
        pieces = PieceSpec(D, boundaries, ((inside,), rest), alpha)
        return PiecewiseSmoothFn(pieces, (one(D), zero(D)), alpha, beta, 1.0, _unit_domain(D), name=name)

    if name == "quadrant":
        axis_line = constant_fn(0.0, 1, alpha)
        boundaries = (Boundary(0, axis_line), Boundary(1, axis_line))
        inside = ("+", "+")
        rest = tuple(t for t in all_sign_tuples(2) if t != inside)
        pieces = PieceSpec(2, boundaries, ((inside,), rest), alpha)
        return PiecewiseSmoothFn(pieces, (one(2), zero(2)), alpha, beta, 1.0, ((-1.0, -1.0), (1.0, 1.0)), name=name)

    if name == "disk":
        table = {"center": [0.5, 0.5], "radius": 0.3}
        lower = HolderFn("named", 1, alpha, 1.0, dict(table, form="disk-lower"), "disk-lower")
        upper = HolderFn("named", 1, alpha, 1.0, dict(table, form="disk-upper"), "disk-upper")
        inside = ("+", "-")
        rest = tuple(t for t in all_sign_tuples(2) if t != inside)
        pieces = PieceSpec(2, (Boundary(1, lower), Boundary(1, upper)), ((inside,), rest), alpha)
        return PiecewiseSmoothFn(pieces, (one(2), zero(2)), alpha, beta, 1.0, _unit_domain(2), name=name)

    if name in ("smooth-sine", "product", "constant", "zero"):
        return _single_piece(smooth_function(name, D, beta, value=value), alpha, beta, name)

    raise ParameterError(f"unknown target: {name}; choose from {', '.join(NAMED_TARGETS)}")


def gen_dataset(target, n: int, sigma: float, seed: int,
                domain: Optional[Tuple[Sequence[float], Sequence[float]]] = None) -> Dataset:
    """n i.i.d. uniform design points with Gaussian noise of standard deviation sigma."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if sigma < 0:
        raise ParameterError("sigma must be >= 0")
    if domain is None:
        domain = target.domain
    lower = np.asarray(domain[0], dtype=float)
    upper = np.asarray(domain[1], dtype=float)
    X = lower + (upper - lower) * stream(seed, "design").random((n, lower.size))
    Y = np.asarray(target(X), dtype=float)
    if sigma > 0:
        Y = Y + sigma * stream(seed, "noise").standard_normal(n)
    descriptor = target.descriptor() if hasattr(target, "descriptor") else {}
    return make_dataset(X, Y, sigma, seed, (lower, upper), descriptor)


def target_from_spec(spec: TargetSpec, seed: int = 0) -> PiecewiseSmoothFn:
    """Resolve a configured target; `random` draws a seeded member of the piecewise class."""
    if spec.name == "random":
        return random_target(seed, spec.alpha, spec.beta, spec.radius, spec.j_boundaries, spec.m_pieces, spec.dim)
    return named_target(spec.name, spec.dim, spec.alpha, spec.beta, spec.value)
