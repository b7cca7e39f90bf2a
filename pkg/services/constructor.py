"""
Constructive approximation service for singlab.
Builds the explicit networks (teeth, saw-tooth, squaring, multipliers,
monomials, steps, indicators) and the composite approximator of piecewise
smooth functions, and measures each against its claimed error bound.
"""

import itertools
from functools import lru_cache
from math import ceil, comb, factorial, log2
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy import integrate

from models.activation import Activation
from models.errors import MissingDerivativeError, ParameterError, UnsupportedConstructionError
from models.functions import SIGNS, HolderFn, PieceSpec, PiecewiseSmoothFn
from models.network import (
    Network,
    abs_net,
    affine_map,
    affine_net,
    affine_output,
    compose,
    constant_net,
    identity_net,
    parallel,
    select_net,
)
from models.results import ApproxReport
from services.funcgen import named_target, smooth_function
from services.quadrature import (
    DEFAULT_POINTS,
    DISCONTINUOUS_POINTS,
    SIMPSON_PANELS,
    qmc_square_error,
    simpson_square_error,
    sup_error,
    tensor_grid,
)

logger = structlog.get_logger(__name__)

# Steepest step used inside cube indicators; keeps a·x well inside float range.
STEP_EPS_FLOOR = 1e-6
# Boundary gaps x_d − h(x_−d) stay within [−STEP_RANGE, STEP_RANGE] on the unit cube.
STEP_RANGE = 2.0
EXACT_TOLERANCE = 1e-12
SIMPSON_TOLERANCE = 1e-4
QMC_TOLERANCE = 5e-3
ANCHOR_GRID = np.linspace(-6.0, 6.0, 1201)
SAWTOOTH_GRID = 4097
MULT_GRID = 201
MULTI_MULT_GRID = 41
MONOMIAL_GRID = 2001


def _require_piecewise(act: Activation, builder: str) -> None:
    if not act.piecewise:
        raise UnsupportedConstructionError(f"{builder} needs a piecewise-linear activation, got {act.kind}")


def _check_open_unit(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value}")


def _check_positive(name: str, value: float) -> None:
    if not value > 0.0:
        raise ParameterError(f"{name} must be positive, got {value}")


def _half_log2_ceil(value: float) -> int:
    """Smallest m >= 1 with 2^{2m} >= value."""
    if value <= 1.0:
        return 1
    return max(1, ceil(0.5 * log2(value)))


# --- saw-tooth family -------------------------------------------------------

def _teeth_coefficients(act: Activation) -> Tuple[float, float, float]:
    """(a, b, c) with a·η(x) − b·η(x − 1/2) + c equal to the tooth on [0, 1]."""
    p, q = act.c1, act.c2
    return 2.0 * (p + q) / (p * (p - q)), 4.0 / (p - q), -2.0 * q / (p - q)


def teeth_net(act: Activation) -> Network:
    _require_piecewise(act, "teeth_net")
    a, b, c = _teeth_coefficients(act)
    layers = [
        (np.array([[1.0], [1.0]]), np.array([0.0, -0.5])),
        (np.array([[a, -b]]), np.array([c])),
    ]
    return Network(layers, act, notes={"builder": "teeth"})


def sawtooth_net(t: int, act: Activation) -> Network:
    if t < 1:
        raise ParameterError(f"t must be a positive count, got {t}")
    tooth = teeth_net(act)
    net = tooth
    for _ in range(t - 1):
        net = compose(tooth, net)
    return net.with_notes(builder="sawtooth", t=t)


def sawtooth_closed_form(t: int, x) -> np.ndarray:
    """g_t on [0, 1]: 2^{t−1} copies of the tooth."""
    y = np.mod(2.0 ** (t - 1) * np.asarray(x, dtype=float), 1.0)
    return np.where(y <= 0.5, 2.0 * y, 2.0 - 2.0 * y)


@lru_cache(maxsize=64)
def square_net(m: int, act: Activation) -> Network:
    """g_m(x) = x − Σ_{t ≤ m} g_t(x) / 4^t, sup error 2^{−2−2m} on [0, 1].

    Each hidden layer carries the current tooth value s and the running sum
    acc as (η(s), η(s − 1/2), η(acc), η(−acc)), so the depth is m + 1 and the
    width stays 4.
    """
    _require_piecewise(act, "square_net")
    if m < 1:
        raise ParameterError(f"m must be a positive count, got {m}")
    a, b, c = _teeth_coefficients(act)
    carry = 1.0 / (act.c1 + act.c2)
    layers = [(np.array([[1.0], [1.0], [1.0], [-1.0]]), np.array([0.0, -0.5, 0.0, 0.0]))]
    tooth_row = np.array([a, -b, 0.0, 0.0])
    for t in range(1, m + 1):
        scale = 4.0 ** -t
        acc_row = np.array([0.0, 0.0, carry, -carry]) - scale * tooth_row
        acc_bias = -scale * c
        if t < m:
            weight = np.vstack([tooth_row, tooth_row, acc_row, -acc_row])
            bias = np.array([c, c - 0.5, acc_bias, -acc_bias])
        else:
            weight, bias = acc_row.reshape(1, -1), np.array([acc_bias])
        layers.append((weight, bias))
    return Network(layers, act, notes={"builder": "square", "m": m, "bound": 2.0 ** (-2 - 2 * m)})


# --- multipliers ------------------------------------------------------------

def mult_bound(m: int, T: float, T_other: Optional[float] = None) -> float:
    return T * (T if T_other is None else T_other) * 2.0 ** (-2 * m)


@lru_cache(maxsize=256)
def mult_net(m: int, T: float, act: Activation, T_other: Optional[float] = None) -> Network:
    """Two-input product x·y for |x| ≤ T, |y| ≤ T_other (default T).

    With u = x/T, v = y/T_other the product is
    T·T_other·(2·((u+v)/2)² − u²/2 − v²/2), each square taken by square_net
    on an absolute value, so the error lies in T·T_other·[−2^{−2−2m}, 2^{−1−2m}].
    """
    _require_piecewise(act, "mult_net")
    tx = float(T)
    ty = tx if T_other is None else float(T_other)
    _check_positive("T", tx)
    _check_positive("T_other", ty)
    halves = affine_net([[0.5 / tx, 0.5 / ty], [1.0 / tx, 0.0], [0.0, 1.0 / ty]], np.zeros(3), act)
    fold = compose(abs_net(3, act), halves)
    square = square_net(m, act)
    squares = parallel([compose(square, select_net([i], 3, act)) for i in range(3)])
    net = affine_output(compose(squares, fold), tx * ty * np.array([2.0, -0.5, -0.5]))
    return net.with_notes(builder="mult", m=m, T=tx, T_other=ty, bound=mult_bound(m, tx, ty))


def multi_mult_bound(m: int, T: float, dprime: int) -> float:
    """Claimed sup error of multi_mult_net.

    dprime·T²·2^{−2m} covers T ≤ 1; the nested chain on normalised inputs
    accumulates at most (dprime − 1)·T^dprime·2^{−1−2m}, which dominates for
    large T.
    """
    if dprime == 2:
        return mult_bound(m, T)
    return max(dprime * T * T * 2.0 ** (-2 * m), (dprime - 1) * T ** dprime * 2.0 ** (-1 - 2 * m))


@lru_cache(maxsize=256)
def multi_mult_net(m: int, T: float, dprime: int, act: Activation) -> Network:
    """Product of dprime inputs in [−T, T], nested as g_c(g_c(x1, x2), x3) ..."""
    _require_piecewise(act, "multi_mult_net")
    if dprime < 2:
        raise ParameterError(f"dprime must be >= 2, got {dprime}")
    _check_positive("T", T)
    if dprime == 2:
        return mult_net(m, T, act).with_notes(builder="multi-mult", dprime=2, bound=multi_mult_bound(m, T, 2))
    unit = mult_net(m, 1.0, act)
    net = affine_net(np.eye(dprime) / T, np.zeros(dprime), act)
    width = dprime
    while width > 1:
        head = compose(unit, select_net([0, 1], width, act))
        if width > 2:
            head = parallel([head, select_net(list(range(2, width)), width, act)])
        net = compose(head, net)
        width -= 1
    net = affine_output(net, [float(T) ** dprime])
    return net.with_notes(builder="multi-mult", m=m, T=T, dprime=dprime, bound=multi_mult_bound(m, T, dprime))


# --- monomials --------------------------------------------------------------

@lru_cache(maxsize=64)
def taylor_anchor(act: Activation, gamma: int) -> float:
    """Point maximizing min_{1≤j≤γ} |η^(j)| on a coarse grid."""
    scores = np.min(np.stack([np.abs(act.derivative(ANCHOR_GRID, j)) for j in range(1, gamma + 1)]), axis=0)
    return float(ANCHOR_GRID[int(np.argmax(scores))])


def monomial_net(gamma: int, eps: float, T: float, act: Activation) -> Network:
    """x ↦ x^γ on [−T, T] within ε in sup norm."""
    _check_open_unit("ε", eps)
    _check_positive("T", T)
    if gamma < 0:
        raise ParameterError(f"γ must be a non-negative count, got {gamma}")
    if gamma == 0:
        return constant_net(1.0, 1, act).with_notes(builder="monomial", gamma=0)

    if act.piecewise:
        if gamma == 1:
            return identity_net(1, 2, act).with_notes(builder="monomial", gamma=1, path="identity")
        m = _half_log2_ceil(max((gamma - 1) * T ** gamma / eps, gamma * T * T / eps))
        replicate = affine_net(np.ones((gamma, 1)), np.zeros(gamma), act)
        net = compose(multi_mult_net(m, float(T), gamma, act), replicate)
        return net.with_notes(builder="monomial", gamma=gamma, path="multiplier", m=m)

    if gamma > act.derivative_budget:
        raise UnsupportedConstructionError(
            f"γ={gamma} exceeds the {act.kind} derivative budget of {act.derivative_budget}"
        )
    anchor = taylor_anchor(act, gamma)
    top = float(act.derivative(anchor, gamma))
    window = np.linspace(anchor - 10.0, anchor + 10.0, 4001)
    sup_next = 2.0 * float(np.max(np.abs(act.derivative(window, gamma + 1))))
    spread = sum(comb(gamma, j) * j ** (gamma + 1) for j in range(gamma + 1))
    a_bar = sup_next * T ** (gamma + 1) * spread / (factorial(gamma + 1) * abs(top) * eps)
    # keeps every hidden argument inside the window the sup was taken on
    a_bar = max(a_bar, gamma * T / 10.0)
    js = np.arange(gamma + 1)
    signs = np.array([(-1.0) ** (gamma - j) * comb(gamma, j) for j in js])
    layers = [
        ((js / a_bar).reshape(-1, 1), np.full(gamma + 1, anchor)),
        ((signs * a_bar ** gamma / top).reshape(1, -1), np.array([0.0])),
    ]
    return Network(layers, act, notes={
        "builder": "monomial", "gamma": gamma, "path": "finite-difference",
        "anchor": anchor, "a_bar": a_bar, "sup_next_derivative": sup_next,
    })


# --- steps ------------------------------------------------------------------

@lru_cache(maxsize=16)
def profile_energy(act: Activation) -> float:
    """K_η = ∫ (profile(u) − 1{u ≥ 0})² du for the unit-scale step profile."""
    left, _ = integrate.quad(lambda u: float(act.step_profile(u)) ** 2, -np.inf, 0.0, limit=200)
    right, _ = integrate.quad(lambda u: (float(act.step_profile(u)) - 1.0) ** 2, 0.0, np.inf, limit=200)
    return left + right


def step_net(eps: float, T: float, act: Activation) -> Network:
    """g_s with ‖g_s − 1{· ≥ 0}‖_{L²([−T, T])} ≤ ε."""
    _check_open_unit("ε", eps)
    _check_positive("T", T)

    if act.piecewise:
        p, q = act.c1, act.c2
        # η(z) + η(−(q/p)z) = κ·max(z, 0)
        kappa = p - q * q / p
        delta = 1.0 / kappa
        a = delta / (12.0 * eps * eps)
        rows, bias, out = [], [], []
        for shift, sign in ((delta / 2.0, 1.0), (-delta / 2.0, -1.0)):
            rows.append(a)
            bias.append(shift)
            out.append(sign)
            if q > 0.0:
                rows.append(-(q / p) * a)
                bias.append(-(q / p) * shift)
                out.append(sign)
        layers = [(np.array(rows).reshape(-1, 1), np.array(bias)), (np.array(out).reshape(1, -1), np.array([0.0]))]
        return Network(layers, act, notes={
            "builder": "step", "path": "ramp", "eps": eps, "a": a, "delta": delta,
            "transition": delta / a, "exact_l2": float(np.sqrt(delta / (12.0 * a))),
        })

    K = profile_energy(act)
    a = 2.0 * K / (eps * eps)
    c, q = act.tail_constant, act.tail_order
    if act.tail_degree == 0:
        layers = [(np.array([[a]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0]))]
        tail_bound_a = max(4.0 * c / eps ** 2, (4.0 * c * (2.0 * q - 1.0) / eps ** 2) ** (4.0 * q - 1.0))
        tail_bound_exponent = 2.0 * (4.0 * q - 1.0)
    else:
        layers = [(np.array([[a], [a]]), np.array([0.5, -0.5])), (np.array([[1.0, -1.0]]), np.array([0.0]))]
        tail_bound_a = (4.0 * c / eps ** 2) ** 4
        tail_bound_exponent = 8.0
    return Network(layers, act, notes={
        "builder": "step", "path": f"profile-k{act.tail_degree}", "eps": eps, "a": a, "profile_energy": K,
        "tail_bound_a": tail_bound_a, "tail_bound_exponent": tail_bound_exponent, "exponent_used": 2.0,
    })


def step_l2_error(net: Network, T: float, panels: int = SIMPSON_PANELS) -> float:
    """L²([−T, T]) distance to the Heaviside step, integrated on each side of 0."""
    left = simpson_square_error(net, lambda x: np.zeros(x.shape[0]), -T, 0.0, panels // 2)
    right = simpson_square_error(net, lambda x: np.ones(x.shape[0]), 0.0, T, panels // 2)
    return float(np.sqrt(left + right))


# --- indicators -------------------------------------------------------------

def box_indicator_net(lower: Sequence[float], upper: Sequence[float], eps: float, act: Activation) -> Network:
    """Π_d (g_s(x_d − lo_d) + g_s(hi_d − x_d) − 1) for the box [lo, hi]."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    D = lower.size
    if D >= 2:
        _require_piecewise(act, "box_indicator_net")
    step = step_net(eps, 1.0, act)
    factors = []
    for d in range(D):
        axis = np.zeros((1, D))
        axis[0, d] = 1.0
        rise = compose(step, affine_net(axis, [-lower[d]], act))
        fall = compose(step, affine_net(-axis, [upper[d]], act))
        factors.append(affine_output(parallel([rise, fall]), [1.0, 1.0], -1.0))
    bank = parallel(factors)
    if D == 1:
        return bank
    m = _half_log2_ceil((D - 1) / eps)
    return compose(multi_mult_net(m, 1.0, D, act), bank)


def cube_indicator_bound(D: int, side: float, eps: float) -> float:
    return D * eps * side + D * eps


def cube_indicator_net(center: Sequence[float], side: float, eps: float, act: Activation) -> Network:
    _check_open_unit("ε", eps)
    _check_positive("side", side)
    center = np.asarray(center, dtype=float)
    lower, upper = center - side / 2.0, center + side / 2.0
    if np.any(lower < -EXACT_TOLERANCE) or np.any(upper > 1.0 + EXACT_TOLERANCE):
        raise ParameterError("cube must lie inside the unit cube")
    net = box_indicator_net(lower, upper, eps, act)
    return net.with_notes(builder="cube-indicator", side=side, eps=eps,
                          bound=cube_indicator_bound(center.size, side, eps))


# --- smooth functions -------------------------------------------------------

def _taylor_table(f: HolderFn, k: int, centers: np.ndarray) -> Tuple[List[Tuple[int, ...]], np.ndarray]:
    """Coefficients of every cube's Taylor polynomial in the global monomials x^b, |b| ≤ k."""
    D = f.dim
    orders = [a for a in itertools.product(range(k + 1), repeat=D) if sum(a) <= k]
    index = {b: i for i, b in enumerate(orders)}
    table = np.zeros((centers.shape[0], len(orders)))
    for a in orders:
        weight = np.asarray(f.derivative(a, centers), dtype=float) / np.prod([factorial(v) for v in a])
        for b in orders:
            if any(bv > av for bv, av in zip(b, a)):
                continue
            term = weight.copy()
            for d in range(D):
                term = term * comb(a[d], b[d]) * (-centers[:, d]) ** (a[d] - b[d])
            table[:, index[b]] += term
    return orders, table


def smooth_net(f: HolderFn, beta: float, delta: float, region, act: Activation,
               points: int = DEFAULT_POINTS, measure: bool = True) -> ApproxReport:
    """Grid-of-cubes approximator Σ_λ P_λ(x)·g_λ(x) of a Hölder function on a box.

    P_λ is the degree ⌈β⌉−1 Taylor polynomial at the centre of cube λ and g_λ
    its indicator. Cubes with constant P_λ are combined affinely; the others
    share one multiplier whose precision is split over the live cubes.
    """
    _check_open_unit("δ", delta)
    _check_positive("β", beta)
    _require_piecewise(act, "smooth_net")
    lower = np.asarray(region[0], dtype=float)
    upper = np.asarray(region[1], dtype=float)
    D = f.dim
    if lower.size != D or upper.size != D:
        raise ParameterError(f"region dimension does not match the function (D={D})")

    k = max(ceil(beta) - 1, 0)
    if f.max_derivative_order < k:
        raise MissingDerivativeError(f"{f.name or f.family} has derivatives up to order "
                                     f"{f.max_derivative_order}, Taylor degree {k} needs more")
    ell = ceil(delta ** (-1.0 / beta))
    eps_steps = max(delta * delta, STEP_EPS_FLOOR)
    width = upper - lower
    T_R = float(max(np.max(np.abs(lower)), np.max(np.abs(upper))))

    cells = np.array(list(itertools.product(range(ell), repeat=D)), dtype=float).reshape(-1, D)
    centers = lower + (cells + 0.5) * width / ell
    orders, table = _taylor_table(f, k, centers)
    degrees = np.array([sum(b) for b in orders])
    nonconst = np.flatnonzero(degrees > 0)
    live = np.any(np.abs(table[:, nonconst]) > 0.0, axis=1) if nonconst.size else np.zeros(len(cells), bool)
    live_idx = np.flatnonzero(live)
    magnitude = np.abs(table) @ (T_R ** degrees)
    T1 = float(magnitude.max())

    lo = lower + cells * width / ell
    hi = lo + width / ell
    lo = np.where(cells == 0, lower - width, lo)
    hi = np.where(cells == ell - 1, upper + width, hi)
    indicators = parallel([box_indicator_net(lo[i], hi[i], eps_steps, act) for i in range(len(cells))])

    m_products = 0
    constant = f.constant_value()
    if constant is not None:
        net = constant_net(float(constant), D, act)
    elif live_idx.size == 0:
        net = affine_output(indicators, table[:, 0])
    else:
        eps_mono = delta / (4.0 * (1.0 + float(np.abs(table).sum(axis=1).max())))
        monomials = []
        for column in nonconst:
            b = orders[column]
            picks = [d for d in range(D) for _ in range(b[d])]
            if len(picks) == 1:
                monomials.append(select_net(picks, D, act))
            else:
                m_b = _half_log2_ceil((len(picks) - 1) * T_R ** len(picks) / (2.0 * eps_mono))
                monomials.append(compose(multi_mult_net(m_b, max(T_R, 1e-12), len(picks), act),
                                         select_net(picks, D, act)))
        poly = affine_map(parallel(monomials), table[np.ix_(live_idx, nonconst)], table[live_idx, 0])

        n_live = live_idx.size
        T_live = float(magnitude[live_idx].max()) + delta
        m_products = _half_log2_ceil(n_live * T_live / (delta / 2.0))
        product = mult_net(m_products, T_live, act, 1.0)
        front = parallel([poly, indicators])
        span = front.output_dim
        branches = [compose(product, select_net([r, n_live + int(i)], span, act)) for r, i in enumerate(live_idx)]
        weights = [1.0] * n_live
        dead = np.flatnonzero(~live)
        if dead.size:
            branches.append(select_net([n_live + int(i) for i in dead], span, act))
            weights.extend(table[dead, 0].tolist())
        net = affine_output(compose(parallel(branches), front), weights)

    params = {
        "beta": beta, "delta": delta, "ell": ell, "k": k, "eps_steps": eps_steps,
        "m_products": m_products, "cubes": len(cells), "live_cubes": int(live_idx.size),
        "output_bound": 2.0 ** D * T1 + delta,
    }
    net = net.with_notes(builder="smooth", **params)
    volume = float(np.prod(width))
    measured, tolerance = float("nan"), QMC_TOLERANCE
    if measure:
        measured = qmc_square_error(net, f, lower, upper, points).l2
    logger.info("smooth_net_built", function=f.name or f.family, ell=ell, k=k, cubes=len(cells),
                live=int(live_idx.size), measured=measured)
    return ApproxReport(builder="smooth", network=net, target=f.name or f.family,
                        claimed_bound=volume * delta, measured_error=measured,
                        grid_size=points if measure else 0, params=params, tolerance=tolerance)


# --- boundaries and pieces --------------------------------------------------

def _boundary_net(h: HolderFn, alpha: float, delta_h: float, region, act: Activation) -> Tuple[Network, str]:
    part = h.affine_part()
    if part is not None:
        w, b = part
        return affine_net(w.reshape(1, -1), [b], act), "affine"
    return smooth_net(h, alpha, delta_h, region, act, measure=False).network, "smooth"


def _gap_net(entries: Sequence[Tuple[int, Network]], D: int, act: Activation) -> Network:
    """x_{d_j} − ĥ_j(x_{−d_j}) for every (axis, boundary network) entry."""
    gaps = []
    for axis, h_net in entries:
        rest = [d for d in range(D) if d != axis]
        level = compose(h_net, select_net(rest, D, act))
        gaps.append(affine_output(parallel([select_net([axis], D, act), level]), [1.0, -1.0]))
    return parallel(gaps)


def _step_bank(gaps: Network, eps: float, act: Activation) -> Network:
    """Outputs ordered [g_s(gap_0), g_s(−gap_0), g_s(gap_1), ...]."""
    J = gaps.output_dim
    orient = np.zeros((2 * J, J))
    for j in range(J):
        orient[2 * j, j] = 1.0
        orient[2 * j + 1, j] = -1.0
    step = step_net(eps, STEP_RANGE, act)
    steps = parallel([compose(step, select_net([i], 2 * J, act)) for i in range(2 * J)])
    return compose(steps, affine_map(gaps, orient))


def halfspace_indicator_net(h_net: Network, axis: int, sign: str, eps: float, act: Activation) -> Network:
    """g_s(±(x_axis − h_net(x_−axis)))."""
    D = h_net.input_dim + 1
    if not 0 <= axis < D:
        raise ParameterError(f"axis {axis} out of range for D={D}")
    if sign not in SIGNS:
        raise ParameterError(f"sign must be one of {SIGNS}, got {sign!r}")
    _check_open_unit("ε", eps)
    gap = _gap_net([(axis, h_net)], D, act)
    orient = 1.0 if sign == "+" else -1.0
    net = compose(step_net(eps, STEP_RANGE, act), affine_map(gap, [[orient]]))
    return net.with_notes(builder="halfspace", axis=axis, sign=sign, eps=eps)


def _unit_region(D: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.zeros(D), np.ones(D)


def indicator_bank(pieces: PieceSpec, eps: float, act: Activation, region=None,
                   groups: Optional[Sequence[int]] = None) -> Tuple[Network, Dict[str, Any]]:
    """Approximate indicators of the listed pieces (default: all), one output each.

    Boundary networks and the step bank are shared by every piece.
    """
    _check_open_unit("ε", eps)
    D, J = pieces.dim, pieces.J
    groups = list(range(pieces.M)) if groups is None else list(groups)
    lower, upper = _unit_region(D) if region is None else (np.asarray(region[0], float), np.asarray(region[1], float))
    if J == 0:
        bank = affine_net(np.zeros((len(groups), D)), np.ones(len(groups)), act)
        return bank, {"J": 0}

    if J >= 2:
        _require_piecewise(act, "indicator_bank")
    eps_s = eps / (2.0 * J)
    delta_h = eps_s * eps_s
    entries, kinds = [], []
    for boundary in pieces.boundaries:
        rest = [d for d in range(D) if d != boundary.axis]
        h_net, kind = _boundary_net(boundary.fn, pieces.alpha, delta_h, (lower[rest], upper[rest]), act)
        entries.append((boundary.axis, h_net))
        kinds.append(kind)
    steps = _step_bank(_gap_net(entries, D, act), eps_s, act)

    tuples = sorted({tup for g in groups for tup in pieces.groups[g]})
    m_J = 0
    products = []
    if J >= 2:
        m_J = _half_log2_ceil((J - 1) * 4.0 * len(tuples) / (2.0 * eps))
    for tup in tuples:
        picks = [2 * j + (0 if s == "+" else 1) for j, s in enumerate(tup)]
        pick = select_net(picks, 2 * J, act)
        products.append(pick if J == 1 else compose(multi_mult_net(m_J, 1.0, J, act), pick))
    membership = np.zeros((len(groups), len(tuples)))
    column = {tup: i for i, tup in enumerate(tuples)}
    for row, g in enumerate(groups):
        for tup in pieces.groups[g]:
            membership[row, column[tup]] = 1.0
    bank = affine_map(compose(parallel(products), steps), membership)
    return bank, {"J": J, "eps_steps": eps_s, "delta_h": delta_h, "m_products": m_J, "boundaries": ",".join(kinds)}


def piece_indicator_net(pieces: PieceSpec, index: int, eps: float, act: Activation, region=None) -> Network:
    if not 0 <= index < pieces.M:
        raise ParameterError(f"piece index {index} out of range for M={pieces.M}")
    net, params = indicator_bank(pieces, eps, act, region, groups=[index])
    return net.with_notes(builder="piece-indicator", index=index, eps=eps, **params)


def coupling_constant(F: float) -> float:
    """C_F in δ2 = C_F·ε2/M."""
    return 1.0 / (2.0 + F * F)


def piecewise_smooth_net(target: PiecewiseSmoothFn, eps1: float, eps2: float, act: Activation,
                         points: int = DISCONTINUOUS_POINTS, measure: bool = True) -> ApproxReport:
    """ĝ(x) = Σ_m g_c(ĝ_{f,m}(x), ĝ_{R,m}(x)) with δ1 = ε1 and δ2 = C_F·ε2/M."""
    _check_open_unit("ε1", eps1)
    _check_open_unit("ε2", eps2)
    region = (target.lower, target.upper)
    M = target.M
    delta1 = eps1
    delta2 = coupling_constant(target.radius) * eps2 / M

    if target.J == 0:
        report = smooth_net(target.functions[0], target.beta, delta1, region, act, points, measure=False)
        net = report.network
        params = {"delta1": delta1, "delta2": delta2, "M": M, "J": 0, "ell": report.params["ell"]}
    else:
        bank, bank_params = indicator_bank(target.pieces, delta2, act, region)
        constants = [fn.constant_value() for fn in target.functions]
        smooth = [m for m, c in enumerate(constants) if c is None]
        params = {"delta1": delta1, "delta2": delta2, "M": M, "J": target.J, **bank_params}
        if not smooth:
            net = affine_output(bank, constants)
        else:
            approximants = [smooth_net(target.functions[m], target.beta, delta1, region, act, measure=False)
                            for m in smooth]
            T_f = max(r.params["output_bound"] for r in approximants)
            m_c = _half_log2_ceil(2.0 * M * T_f * (1.0 + delta2) / eps1)
            product = mult_net(m_c, T_f, act, 1.0 + delta2)
            front = parallel([r.network for r in approximants] + [bank])
            span, offset = front.output_dim, len(smooth)
            branches = [compose(product, select_net([r, offset + m], span, act)) for r, m in enumerate(smooth)]
            weights = [1.0] * len(smooth)
            flat = [m for m, c in enumerate(constants) if c is not None and c != 0.0]
            if flat:
                branches.append(select_net([offset + m for m in flat], span, act))
                weights.extend(constants[m] for m in flat)
            net = affine_output(compose(parallel(branches), front), weights)
            params.update({"m_combine": m_c, "output_bound": T_f})

    net = net.with_notes(builder="piecewise", **params)
    measured = float("nan")
    if measure:
        measured = qmc_square_error(net, target, target.lower, target.upper, points).l2
    metrics = net.metrics()
    logger.info("piecewise_net_built", target=target.name, M=M, J=target.J, L=metrics.depth,
                S=metrics.sparsity, measured=measured)
    return ApproxReport(builder="piecewise", network=net, target=target.name, claimed_bound=eps1 + eps2,
                        measured_error=measured, grid_size=points if measure else 0, params=params,
                        tolerance=QMC_TOLERANCE)


# --- dispatch ---------------------------------------------------------------

class NetworkBuilder:
    """Runs one named construction with CLI-style parameters and measures it."""

    NAMES = (
        "teeth", "sawtooth", "square", "mult", "multi-mult", "monomial", "step",
        "cube-indicator", "halfspace", "piece-indicator", "smooth", "piecewise",
    )

    def __init__(self, act: Activation, points: Optional[int] = None):
        self.act = act
        self.points = points

    def build(self, name: str, params: Optional[Dict[str, Any]] = None) -> ApproxReport:
        if name not in self.NAMES:
            raise ParameterError(f"unknown builder: {name}; choose from {', '.join(self.NAMES)}")
        params = dict(params or {})
        handler: Callable[[Dict[str, Any]], ApproxReport] = getattr(self, "_" + name.replace("-", "_"))
        report = handler(params)
        logger.info("construct_done", builder=name, claimed=report.claimed_bound,
                    measured=report.measured_error, within=report.within_bound)
        return report

    def _qmc_points(self, default: int) -> int:
        return self.points or default

    @staticmethod
    def _sup_report(name, net, target, truth, grid, claimed, params) -> ApproxReport:
        measured = sup_error(net, truth, grid)
        return ApproxReport(builder=name, network=net, target=target, claimed_bound=claimed,
                            measured_error=measured, grid_size=grid.shape[0], error_kind="sup",
                            params=params, tolerance=EXACT_TOLERANCE)

    def _teeth(self, p):
        grid = np.linspace(0.0, 1.0, SAWTOOTH_GRID).reshape(-1, 1)
        return self._sup_report("teeth", teeth_net(self.act), "teeth g_w",
                                lambda x: sawtooth_closed_form(1, x[:, 0]), grid, EXACT_TOLERANCE, {})

    def _sawtooth(self, p):
        t = int(p.get("t", 3))
        grid = np.linspace(0.0, 1.0, SAWTOOTH_GRID).reshape(-1, 1)
        return self._sup_report("sawtooth", sawtooth_net(t, self.act), f"sawtooth g_{t}",
                                lambda x: sawtooth_closed_form(t, x[:, 0]), grid, EXACT_TOLERANCE, {"t": t})

    def _square(self, p):
        m = int(p.get("m", 4))
        grid = np.linspace(0.0, 1.0, SAWTOOTH_GRID).reshape(-1, 1)
        return self._sup_report("square", square_net(m, self.act), "x^2", lambda x: x[:, 0] ** 2,
                                grid, 2.0 ** (-2 - 2 * m), {"m": m})

    def _mult(self, p):
        m, T = int(p.get("m", 4)), float(p.get("T", 1.0))
        grid = tensor_grid([-T, -T], [T, T], MULT_GRID)
        return self._sup_report("mult", mult_net(m, T, self.act), "x*y", lambda x: x[:, 0] * x[:, 1],
                                grid, mult_bound(m, T), {"m": m, "T": T})

    def _multi_mult(self, p):
        m, T, dprime = int(p.get("m", 5)), float(p.get("T", 1.0)), int(p.get("dprime", 3))
        grid = tensor_grid([-T] * dprime, [T] * dprime, MULTI_MULT_GRID)
        return self._sup_report("multi-mult", multi_mult_net(m, T, dprime, self.act), f"prod of {dprime}",
                                lambda x: np.prod(x, axis=1), grid, multi_mult_bound(m, T, dprime),
                                {"m": m, "T": T, "dprime": dprime})

    def _monomial(self, p):
        gamma, eps, T = int(p.get("gamma", 3)), float(p.get("eps", 0.01)), float(p.get("T", 1.0))
        grid = np.linspace(-T, T, MONOMIAL_GRID).reshape(-1, 1)
        net = monomial_net(gamma, eps, T, self.act)
        return self._sup_report("monomial", net, f"x^{gamma}", lambda x: x[:, 0] ** gamma, grid, eps,
                                {"gamma": gamma, "eps": eps, "T": T})

    def _step(self, p):
        eps, T = float(p.get("eps", 0.01)), float(p.get("T", 1.0))
        net = step_net(eps, T, self.act)
        params = {"eps": eps, "T": T, "a": net.notes["a"]}
        return ApproxReport(builder="step", network=net, target="heaviside", claimed_bound=eps,
                            measured_error=step_l2_error(net, T), grid_size=SIMPSON_PANELS,
                            params=params, tolerance=SIMPSON_TOLERANCE)

    def _cube_indicator(self, p):
        D, side, eps = int(p.get("D", 2)), float(p.get("side", 0.25)), float(p.get("eps", 0.05))
        center = np.asarray(p.get("center", [0.5] * D), dtype=float)
        net = cube_indicator_net(center, side, eps, self.act)
        lo, hi = center - side / 2.0, center + side / 2.0
        truth = lambda x: np.all((x >= lo) & (x <= hi), axis=1).astype(float)
        points = self._qmc_points(DEFAULT_POINTS)
        measured = qmc_square_error(net, truth, np.zeros(D), np.ones(D), points).l2
        return ApproxReport(builder="cube-indicator", network=net, target=f"cube side {side}",
                            claimed_bound=cube_indicator_bound(D, side, eps), measured_error=measured,
                            grid_size=points, params={"D": D, "side": side, "eps": eps}, tolerance=QMC_TOLERANCE)

    def _halfspace(self, p):
        D, level, eps = int(p.get("D", 2)), float(p.get("h", 0.5)), float(p.get("eps", 0.05))
        axis, sign = int(p.get("axis", D - 1)), str(p.get("sign", "+"))
        h_net = affine_net(np.zeros((1, D - 1)), [level], self.act)
        net = halfspace_indicator_net(h_net, axis, sign, eps, self.act)
        orient = 1.0 if sign == "+" else -1.0
        truth = lambda x: (orient * (x[:, axis] - level) >= 0.0).astype(float)
        points = self._qmc_points(DEFAULT_POINTS)
        measured = qmc_square_error(net, truth, np.zeros(D), np.ones(D), points).l2
        return ApproxReport(builder="halfspace", network=net, target=f"x_{axis} {sign} {level}",
                            claimed_bound=eps, measured_error=measured, grid_size=points,
                            params={"D": D, "h": level, "axis": axis, "eps": eps}, tolerance=QMC_TOLERANCE)

    def _target(self, p) -> PiecewiseSmoothFn:
        return named_target(str(p.get("target", "graph-indicator")), int(p.get("D", 2)),
                            float(p.get("alpha", 2.0)), float(p.get("beta", 2.0)))

    def _piece_indicator(self, p):
        target = self._target(p)
        index, eps = int(p.get("index", target.M - 1)), float(p.get("eps", 0.05))
        net = piece_indicator_net(target.pieces, index, eps, self.act, (target.lower, target.upper))
        points = self._qmc_points(DEFAULT_POINTS)
        measured = qmc_square_error(net, lambda x: target.indicator(index, x), target.lower, target.upper,
                                    points).l2
        return ApproxReport(builder="piece-indicator", network=net, target=f"{target.name}[{index}]",
                            claimed_bound=eps, measured_error=measured, grid_size=points,
                            params={"index": index, "eps": eps, "alpha": target.alpha}, tolerance=QMC_TOLERANCE)

    def _smooth(self, p):
        D, beta = int(p.get("D", 2)), float(p.get("beta", 2.0))
        f = smooth_function(str(p.get("function", "smooth-sine")), D, beta, int(p.get("seed", 0)))
        return smooth_net(f, beta, float(p.get("delta", 0.1)), _unit_region(D), self.act,
                          self._qmc_points(DEFAULT_POINTS))

    def _piecewise(self, p):
        return piecewise_smooth_net(self._target(p), float(p.get("eps1", 0.05)), float(p.get("eps2", 0.05)),
                                    self.act, self._qmc_points(DISCONTINUOUS_POINTS))
