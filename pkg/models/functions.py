"""
Target function models: Hölder-smooth functions, piece partitions cut by
boundary graphs, piecewise smooth functions and regression datasets.

Everything here is immutable after construction and serializable through
plain dictionaries (coefficient tables), which is what the dataset sidecars
and the run manifests store.
"""

import itertools
from dataclasses import dataclass, field
from math import factorial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.errors import DomainError, MissingDerivativeError, ParameterError

FAMILIES = ("polynomial", "cosine-series", "named")
# Derivative order reported for families with exact oracles of every order.
UNBOUNDED_ORDER = 64
SIGNS = ("+", "-")


def _readonly(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


def _as_points(x, dim: int) -> Tuple[np.ndarray, bool]:
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    if single:
        points = points.reshape(1, -1)
    if points.shape[1] != dim:
        raise DomainError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return points, single


# --- named closed forms without derivative oracles ----------------------------

def _disk_half(points: np.ndarray, table: Dict[str, Any], sign: float) -> np.ndarray:
    cx, cy, r = table["center"][0], table["center"][1], table["radius"]
    reach = np.sqrt(np.clip(r * r - (points[:, 0] - cx) ** 2, 0.0, None))
    return cy + sign * reach


NAMED_FORMS = {
    "disk-upper": lambda points, table: _disk_half(points, table, 1.0),
    "disk-lower": lambda points, table: _disk_half(points, table, -1.0),
}


@dataclass(frozen=True, eq=False)
class HolderFn:
    """A member of a Hölder ball, described by a coefficient table.

    polynomial:    f(x) = Σ c_i Π_d x_d^{e_id}
    cosine-series: f(x) = offset + Σ a_i Π_d cos(π k_id x_d − φ_id)
    named:         closed forms from NAMED_FORMS (values only)
    """

    family: str
    dim: int
    beta: float
    radius: float
    table: Dict[str, Any] = field(default_factory=dict)
    name: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown function family: {self.family}")
        if self.beta <= 0 or self.radius <= 0:
            raise ParameterError("smoothness and radius must be positive")
        if self.family == "named" and self.table.get("form") not in NAMED_FORMS:
            raise ParameterError(f"unknown named form: {self.table.get('form')}")

    # --- coefficient accessors ---

    @property
    def _exponents(self) -> np.ndarray:
        return np.asarray(self.table["exponents"], dtype=int).reshape(-1, self.dim)

    @property
    def _coefficients(self) -> np.ndarray:
        return np.asarray(self.table["coefficients"], dtype=float)

    @property
    def _frequencies(self) -> np.ndarray:
        return np.asarray(self.table["frequencies"], dtype=float).reshape(-1, self.dim)

    @property
    def _phases(self) -> np.ndarray:
        return np.asarray(self.table["phases"], dtype=float).reshape(-1, self.dim)

    @property
    def _amplitudes(self) -> np.ndarray:
        return np.asarray(self.table["amplitudes"], dtype=float)

    @property
    def max_derivative_order(self) -> int:
        return 0 if self.family == "named" else UNBOUNDED_ORDER

    # --- evaluation ---

    def __call__(self, x) -> np.ndarray:
        return self.derivative((0,) * self.dim, x)

    def derivative(self, order: Sequence[int], x) -> np.ndarray:
        """Partial derivative ∂^order f evaluated at x (shape (n, D) or (D,))."""
        order = tuple(int(o) for o in order)
        if len(order) != self.dim:
            raise ParameterError(f"multi-index {order} does not match dimension {self.dim}")
        if sum(order) > self.max_derivative_order:
            raise MissingDerivativeError(f"{self.name or self.family} has no derivative oracle of order {sum(order)}")
        points, single = _as_points(x, self.dim)

        if self.family == "named":
            values = NAMED_FORMS[self.table["form"]](points, self.table)
        elif self.family == "polynomial":
            values = np.zeros(points.shape[0])
            for exps, coef in zip(self._exponents, self._coefficients):
                if coef == 0.0 or np.any(exps < np.array(order)):
                    continue
                term = np.full(points.shape[0], coef)
                for d, (e, o) in enumerate(zip(exps, order)):
                    term = term * (factorial(e) / factorial(e - o)) * points[:, d] ** (e - o)
                values = values + term
        else:
            values = np.zeros(points.shape[0])
            if not any(order):
                values = values + float(self.table.get("offset", 0.0))
            for freq, phase, amp in zip(self._frequencies, self._phases, self._amplitudes):
                if amp == 0.0:
                    continue
                term = np.full(points.shape[0], amp)
                for d in range(self.dim):
                    omega = np.pi * freq[d]
                    term = term * omega ** order[d] * np.cos(omega * points[:, d] - phase[d] + order[d] * np.pi / 2)
                values = values + term
        return values[0] if single else values

    # --- structural queries used by the builders ---

    def affine_part(self) -> Optional[Tuple[np.ndarray, float]]:
        """(w, b) when f(x) = w·x + b exactly, otherwise None."""
        if self.family == "polynomial":
            exps, coefs = self._exponents, self._coefficients
            live = coefs != 0.0
            if np.any(exps[live].sum(axis=1) > 1):
                return None
            w = np.zeros(self.dim)
            b = 0.0
            for e, c in zip(exps[live], coefs[live]):
                if e.sum() == 0:
                    b += c
                else:
                    w[int(np.argmax(e))] += c
            return w, b
        if self.family == "cosine-series":
            live = self._amplitudes != 0.0
            if np.any(self._frequencies[live] != 0.0):
                return None
            const = float(self.table.get("offset", 0.0))
            for phase, amp in zip(self._phases[live], self._amplitudes[live]):
                const += amp * float(np.prod(np.cos(-phase)))
            return np.zeros(self.dim), const
        return None

    def constant_value(self) -> Optional[float]:
        part = self.affine_part()
        if part is None or np.any(part[0] != 0.0):
            return None
        return part[1]

    def sup_bound(self) -> float:
        """Crude bound on sup |f| over the unit cube."""
        if self.family == "polynomial":
            return float(np.abs(self._coefficients).sum())
        if self.family == "cosine-series":
            return abs(float(self.table.get("offset", 0.0))) + float(np.abs(self._amplitudes).sum())
        return self.radius

    def scaled(self, scale: float, shift: float) -> "HolderFn":
        """The function scale·f + shift, in the same family."""
        table = dict(self.table)
        if self.family == "polynomial":
            exps = self._exponents.tolist() + [[0] * self.dim]
            table = {"exponents": exps, "coefficients": (scale * self._coefficients).tolist() + [shift]}
        elif self.family == "cosine-series":
            table["amplitudes"] = (scale * self._amplitudes).tolist()
            table["offset"] = scale * float(self.table.get("offset", 0.0)) + shift
        else:
            raise ParameterError("named closed forms cannot be rescaled")
        return HolderFn(self.family, self.dim, self.beta, max(self.radius * abs(scale) + abs(shift), 1e-12), table, self.name)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family, "dim": self.dim, "beta": self.beta, "radius": self.radius,
                "name": self.name, "table": _plain_table(self.table)}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "HolderFn":
        return cls(doc["family"], int(doc["dim"]), float(doc["beta"]), float(doc["radius"]),
                   dict(doc["table"]), doc.get("name"))


def _plain_table(table: Dict[str, Any]) -> Dict[str, Any]:
    out = {}
    for key, value in table.items():
        out[key] = value.tolist() if isinstance(value, np.ndarray) else value
    return out


def polynomial(coefficients: Dict[Tuple[int, ...], float], dim: int, beta: float = 2.0,
               radius: Optional[float] = None, name: Optional[str] = None) -> HolderFn:
    exps = [list(k) for k in coefficients]
    coefs = [float(v) for v in coefficients.values()]
    bound = radius if radius is not None else max(sum(abs(c) for c in coefs), 1e-12)
    return HolderFn("polynomial", dim, beta, bound, {"exponents": exps, "coefficients": coefs}, name)


def cosine_series(frequencies, amplitudes, phases=None, offset: float = 0.0, beta: float = 2.0,
                  radius: Optional[float] = None, name: Optional[str] = None) -> HolderFn:
    freqs = np.atleast_2d(np.asarray(frequencies, dtype=float))
    amps = np.asarray(amplitudes, dtype=float).reshape(-1)
    phases = np.zeros_like(freqs) if phases is None else np.atleast_2d(np.asarray(phases, dtype=float))
    bound = radius if radius is not None else max(abs(offset) + float(np.abs(amps).sum()), 1e-12)
    table = {"frequencies": freqs.tolist(), "phases": phases.tolist(), "amplitudes": amps.tolist(), "offset": float(offset)}
    return HolderFn("cosine-series", freqs.shape[1], beta, bound, table, name)


def constant_fn(value: float, dim: int, beta: float = 2.0) -> HolderFn:
    return polynomial({(0,) * dim: value}, dim, beta, radius=max(abs(value), 1e-12), name="constant")


# --- pieces -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Boundary:
    axis: int
    fn: HolderFn


@dataclass(frozen=True, eq=False)
class PieceSpec:
    """J boundary graphs x_{d_j} = h_j(x_{−d_j}) and a partition of {+,−}^J.

    A point has sign '+' for boundary j when x_{d_j} ≥ h_j(x_{−d_j}).
    """

    dim: int
    boundaries: Tuple[Boundary, ...]
    groups: Tuple[Tuple[Tuple[str, ...], ...], ...]
    alpha: float = 2.0

    def __post_init__(self):
        J = len(self.boundaries)
        for b in self.boundaries:
            if not 0 <= b.axis < self.dim:
                raise ParameterError(f"boundary axis {b.axis} out of range for D={self.dim}")
            if b.fn.dim != self.dim - 1:
                raise ParameterError("boundary functions live on I^{D-1}")
        if not self.groups:
            raise ParameterError("at least one piece is required")
        seen = set()
        for group in self.groups:
            if not group:
                raise ParameterError("every piece needs at least one sign tuple")
            for tup in group:
                if len(tup) != J or any(s not in SIGNS for s in tup):
                    raise ParameterError(f"invalid sign tuple {tup}")
                if tup in seen:
                    raise ParameterError(f"sign tuple {tup} assigned to two pieces")
                seen.add(tup)
        if len(seen) != 2 ** J:
            raise ParameterError("sign tuples must exhaust {+,-}^J")

    @property
    def J(self) -> int:
        return len(self.boundaries)

    @property
    def M(self) -> int:
        return len(self.groups)

    def gaps(self, points: np.ndarray) -> np.ndarray:
        """x_{d_j} − h_j(x_{−d_j}) for every boundary, shape (n, J)."""
        out = np.empty((points.shape[0], self.J))
        for j, b in enumerate(self.boundaries):
            rest = np.delete(points, b.axis, axis=1)
            out[:, j] = points[:, b.axis] - b.fn(rest)
        return out

    def piece_index(self, x) -> np.ndarray:
        """Index of the piece containing each point; ties go to the lowest index."""
        points, single = _as_points(x, self.dim)
        gaps = self.gaps(points)
        plus = gaps >= 0.0
        tied = gaps == 0.0
        index = np.full(points.shape[0], -1, dtype=int)
        for m, group in enumerate(self.groups):
            hit = np.zeros(points.shape[0], dtype=bool)
            for tup in group:
                want = np.array([s == "+" for s in tup], dtype=bool)
                hit |= np.all((plus == want) | tied, axis=1)
            index = np.where((index < 0) & hit, m, index)
        return index[0] if single else index

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dim": self.dim,
            "alpha": self.alpha,
            "boundaries": [{"axis": b.axis, "fn": b.fn.to_dict()} for b in self.boundaries],
            "groups": [[list(t) for t in g] for g in self.groups],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "PieceSpec":
        boundaries = tuple(Boundary(int(b["axis"]), HolderFn.from_dict(b["fn"])) for b in doc["boundaries"])
        groups = tuple(tuple(tuple(t) for t in g) for g in doc["groups"])
        return cls(int(doc["dim"]), boundaries, groups, float(doc.get("alpha", 2.0)))


def all_sign_tuples(J: int) -> List[Tuple[str, ...]]:
    return list(itertools.product(SIGNS, repeat=J))


@dataclass(frozen=True, eq=False)
class PiecewiseSmoothFn:
    pieces: PieceSpec
    functions: Tuple[HolderFn, ...]
    alpha: float
    beta: float
    radius: float
    domain: Tuple[Tuple[float, ...], Tuple[float, ...]] = ((0.0, 0.0), (1.0, 1.0))
    name: str = "custom"

    def __post_init__(self):
        if len(self.functions) != self.pieces.M:
            raise ParameterError(f"{self.pieces.M} pieces but {len(self.functions)} functions")
        if len(self.domain[0]) != self.pieces.dim:
            raise ParameterError("domain dimension does not match the pieces")

    @property
    def dim(self) -> int:
        return self.pieces.dim

    @property
    def M(self) -> int:
        return self.pieces.M

    @property
    def J(self) -> int:
        return self.pieces.J

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.domain[0], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.domain[1], dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def __call__(self, x) -> np.ndarray:
        points, single = _as_points(x, self.dim)
        index = self.pieces.piece_index(points)
        values = np.zeros(points.shape[0])
        for m, fn in enumerate(self.functions):
            mask = index == m
            if np.any(mask):
                values[mask] = fn(points[mask])
        return values[0] if single else values

    def indicator(self, m: int, x) -> np.ndarray:
        points, single = _as_points(x, self.dim)
        values = (self.pieces.piece_index(points) == m).astype(float)
        return values[0] if single else values

    def descriptor(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "alpha": self.alpha,
            "beta": self.beta,
            "radius": self.radius,
            "domain": [list(self.domain[0]), list(self.domain[1])],
            "pieces": self.pieces.to_dict(),
            "functions": [fn.to_dict() for fn in self.functions],
        }

    @classmethod
    def from_descriptor(cls, doc: Dict[str, Any]) -> "PiecewiseSmoothFn":
        return cls(
            pieces=PieceSpec.from_dict(doc["pieces"]),
            functions=tuple(HolderFn.from_dict(f) for f in doc["functions"]),
            alpha=float(doc["alpha"]),
            beta=float(doc["beta"]),
            radius=float(doc["radius"]),
            domain=(tuple(doc["domain"][0]), tuple(doc["domain"][1])),
            name=doc.get("name", "custom"),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    sigma: float
    seed: int
    domain: Tuple[Tuple[float, ...], Tuple[float, ...]]
    target: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.X.ndim != 2 or self.Y.ndim != 1 or self.X.shape[0] != self.Y.shape[0]:
            raise ParameterError("dataset needs X of shape (n, D) and Y of shape (n,)")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def with_response(self, Y: np.ndarray) -> "Dataset":
        """Same design, different responses (used for superposition checks)."""
        return Dataset(self.X, _readonly(Y), self.sigma, self.seed, self.domain, self.target)


def make_dataset(X, Y, sigma: float, seed: int, domain, target: Optional[Dict[str, Any]] = None) -> Dataset:
    dom = (tuple(float(v) for v in domain[0]), tuple(float(v) for v in domain[1]))
    return Dataset(_readonly(X), _readonly(Y), float(sigma), int(seed), dom, dict(target or {}))
