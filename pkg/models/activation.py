"""
Activation functions used by every network in the lab.

Two families are supported:
  * condition (ii): piecewise linear η(x) = c1·x for x ≥ 0 and c2·x for x < 0
    with c1 > c2 ≥ 0 (ReLU, LeakyReLU, general AffinePiecewise);
  * condition (i): smooth saturating or asymptotically linear activations
    (Sigmoid, SoftPlus, Swish) with derivatives of every order.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import expit

from models.errors import ParameterError

PIECEWISE_KINDS = ("relu", "leaky-relu", "affine-piecewise")
SMOOTH_KINDS = ("sigmoid", "softplus", "swish")

# Highest derivative order the condition-(i) oracles are trusted for.
DERIVATIVE_BUDGET = 12


@lru_cache(maxsize=None)
def _sigmoid_polynomial(order: int) -> Polynomial:
    """P_j with σ^{(j)}(x) = P_j(σ(x)), from σ' = σ(1 − σ)."""
    poly = Polynomial([0.0, 1.0])
    logistic = Polynomial([0.0, 1.0, -1.0])
    for _ in range(order):
        poly = poly.deriv() * logistic
    return poly


def sigmoid_derivative(x: np.ndarray, order: int) -> np.ndarray:
    return _sigmoid_polynomial(order)(expit(x))


@dataclass(frozen=True)
class Activation:
    kind: str
    c1: float = 1.0
    c2: float = 0.0

    def __post_init__(self):
        if self.kind not in PIECEWISE_KINDS + SMOOTH_KINDS:
            raise ParameterError(f"unknown activation kind: {self.kind}")
        if self.kind in PIECEWISE_KINDS and not (self.c1 > self.c2 >= 0.0):
            raise ParameterError(f"piecewise slopes must satisfy c1 > c2 >= 0, got c1={self.c1}, c2={self.c2}")

    # --- classification -------------------------------------------------

    @property
    def condition(self) -> str:
        return "ii" if self.kind in PIECEWISE_KINDS else "i"

    @property
    def piecewise(self) -> bool:
        return self.condition == "ii"

    @property
    def tail_degree(self) -> int:
        """k: the polynomial degree η approaches at +∞ (0 saturating, 1 linear)."""
        if self.kind == "sigmoid":
            return 0
        return 1

    @property
    def tail_order(self) -> float:
        """q: declared polynomial decay order of the tail residual."""
        return 1.0

    @property
    def tail_constant(self) -> float:
        """c_η with |η(x) − limit| ≤ c_η |x|^{−q} in the tails."""
        return {"sigmoid": 0.2785, "softplus": 0.2785, "swish": 0.2785}.get(self.kind, 0.0)

    @property
    def derivative_budget(self) -> int:
        return DERIVATIVE_BUDGET if not self.piecewise else 1

    # --- evaluation -----------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.piecewise:
            return np.where(x >= 0.0, self.c1 * x, self.c2 * x)
        if self.kind == "sigmoid":
            return expit(x)
        if self.kind == "softplus":
            return np.logaddexp(0.0, x)
        return x * expit(x)

    def derivative(self, x, order: int = 1):
        """Analytic derivative of the given order, evaluated element-wise."""
        x = np.asarray(x, dtype=float)
        if order == 0:
            return self(x)
        if order < 0:
            raise ParameterError("derivative order must be non-negative")
        if self.piecewise:
            if order == 1:
                return np.where(x >= 0.0, self.c1, self.c2)
            return np.zeros_like(x)
        if order > self.derivative_budget + 1:
            raise ParameterError(f"{self.kind} derivative oracle is limited to order {self.derivative_budget + 1}")
        if self.kind == "sigmoid":
            return sigmoid_derivative(x, order)
        if self.kind == "softplus":
            return sigmoid_derivative(x, order - 1)
        return x * sigmoid_derivative(x, order) + order * sigmoid_derivative(x, order - 1)

    def step_profile(self, u):
        """Unit-scale step shape used by the condition-(i) step builders.

        k = 0: η(u) itself (limits 0 and 1).
        k = 1: η(u + 1/2) − η(u − 1/2) (limits 0 and 1).
        """
        u = np.asarray(u, dtype=float)
        if self.tail_degree == 0:
            return self(u)
        return self(u + 0.5) - self(u - 0.5)

    # --- persistence ----------------------------------------------------

    def descriptor(self) -> Dict[str, Any]:
        return {"kind": self.kind, "c1": float(self.c1), "c2": float(self.c2), "condition": self.condition}

    @classmethod
    def from_descriptor(cls, doc: Dict[str, Any]) -> "Activation":
        return cls(kind=doc["kind"], c1=float(doc.get("c1", 1.0)), c2=float(doc.get("c2", 0.0)))


def make_activation(name: str, slope: float = 0.2, c1: float = 1.0) -> Activation:
    """Build an activation from its CLI name.

    `slope` is the negative-side slope of LeakyReLU / AffinePiecewise.
    """
    name = name.lower().replace("_", "-")
    if name == "relu":
        return Activation("relu", 1.0, 0.0)
    if name in ("leaky-relu", "leakyrelu"):
        return Activation("leaky-relu", 1.0, slope)
    if name == "affine-piecewise":
        return Activation("affine-piecewise", c1, slope)
    if name in SMOOTH_KINDS:
        return Activation(name)
    raise ParameterError(f"unknown activation: {name}")


RELU = Activation("relu")
LEAKY_RELU = Activation("leaky-relu", 1.0, 0.2)
