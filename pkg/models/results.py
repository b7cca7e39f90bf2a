"""
Result records written by the harness and the CLI.
Tables and summaries are pydantic models so they validate on load and dump
straight into the CSV/JSON report files.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from models.network import Network


@dataclass
class ApproxReport:
    """One constructed network and how well it does against its claimed bound."""

    builder: str
    network: Network
    target: str
    claimed_bound: float
    measured_error: float
    grid_size: int
    error_kind: str = "l2"
    params: Dict[str, Any] = field(default_factory=dict)
    tolerance: float = 0.0

    @property
    def within_bound(self) -> bool:
        return self.measured_error <= self.claimed_bound + self.tolerance

    def to_row(self) -> Dict[str, Any]:
        m = self.network.metrics()
        row = {
            "builder": self.builder,
            "target": self.target,
            "error_kind": self.error_kind,
            "claimed_bound": self.claimed_bound,
            "measured_error": self.measured_error,
            "within_bound": self.within_bound,
            "grid_size": self.grid_size,
            "L": m.depth,
            "S": m.sparsity,
            "B": m.magnitude,
        }
        row["params"] = ";".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return row


class RateRow(BaseModel):
    n: int = Field(ge=1)
    reps: int = Field(ge=1)
    mean_error: float
    stderr: float = 0.0
    failed: int = 0
    choice: str = ""


class RateTable(BaseModel):
    estimator: str
    target: str
    alpha: float
    beta: float
    D: int
    x_name: str = "n"
    error_kind: str = "squared-l2"
    rows: List[RateRow] = []
    slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    intercept: Optional[float] = None
    excluded_rows: int = 0
    failed_cells: int = 0
    theoretical_exponent: Optional[float] = None
    exponent_source: str = ""
    degenerate: bool = False
    trend_ok: bool = True
    flags: Dict[str, bool] = {}

    def summary(self) -> Dict[str, Any]:
        return self.model_dump(exclude={"rows"})


class TheoreticalRates(BaseModel):
    alpha: float
    beta: float
    D: int
    dnn_exponent: float
    dnn_smooth_exponent: float
    dnn_boundary_exponent: float
    linear_exponent: float
    wavelet_exponent: float = 0.5
    curvelet_exponent: float = 1.0 / 3.0
    linear_suboptimal: bool
    wavelet_active: bool
    curvelet_active: bool

    def flags(self) -> Dict[str, bool]:
        return {
            "linear_suboptimal": self.linear_suboptimal,
            "wavelet_active": self.wavelet_active,
            "curvelet_active": self.curvelet_active,
        }


class SweepCell(BaseModel):
    """Outcome of one (n, rep) cell; errors holds one value per candidate config."""

    n: int
    rep: int
    seed: int
    errors: List[Optional[float]] = []
    labels: List[str] = []
    failed: bool = False
    message: str = ""
