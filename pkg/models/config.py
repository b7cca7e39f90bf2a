"""
Run configuration models for singlab.

Values come from four layers, highest precedence first: command-line flags,
the flat KEY=VALUE run file, SINGLAB_* environment variables and the
defaults declared here. The resolved RunConfig is frozen and dumped verbatim
into every run manifest.
"""

import os
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from models.errors import ConfigurationError

COMMANDS = ("construct", "approx-sweep", "regress", "rate-sweep", "report")
ESTIMATORS = ("dnn", "kernel-ridge", "wavelet", "curvelet")


class DnnConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    width: int = Field(32, ge=1)
    depth: int = Field(3, ge=1)
    activation: str = "relu"
    slope: float = Field(0.2, ge=0.0)
    clip: Optional[float] = Field(None, gt=0.0)
    learning_rate: float = Field(0.05, gt=0.0)
    momentum: float = Field(0.9, ge=0.0, lt=1.0)
    iterations: int = Field(2000, ge=1)
    restarts: int = Field(5, ge=1)
    lr_floor: float = Field(1e-6, gt=0.0)
    # Stop a restart once the trailing loss decrease Δ̂ falls below this.
    gap_target: Optional[float] = Field(None, gt=0.0)
    # Scale the width with the sample size instead of using `width`.
    budget_width: bool = False
    max_width: int = Field(256, ge=1)


class KernelRidgeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    kernel: Literal["gaussian", "laplacian"] = "gaussian"
    bandwidth: float = Field(0.2, gt=0.0)
    ridge: float = 1e-3
    bandwidth_grid: List[float] = []
    ridge_grid: List[float] = []


class WaveletConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: int = Field(3, ge=0)
    tau_grid: List[int] = []


class CurveletConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau: int = Field(2, ge=0)
    tau_grid: List[int] = []
    grid_size: int = Field(256, ge=8)
    delta1: int = Field(1, ge=1)
    delta2: int = Field(1, ge=1)


class FitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dnn: DnnConfig = DnnConfig()
    kernel_ridge: KernelRidgeConfig = KernelRidgeConfig()
    wavelet: WaveletConfig = WaveletConfig()
    curvelet: CurveletConfig = CurveletConfig()
    # Candidate selection granularity for grid-tuned estimators.
    tune: Literal["per-n", "per-rep"] = "per-n"


class TargetSpec(BaseModel):
    """A named target, or `random` for a seeded member of the piecewise class."""

    model_config = ConfigDict(frozen=True)

    name: str = "graph-indicator"
    alpha: float = Field(2.0, gt=0.0)
    beta: float = Field(2.0, gt=0.0)
    dim: int = Field(2, ge=1)
    m_pieces: int = Field(2, ge=1)
    j_boundaries: int = Field(1, ge=0)
    radius: float = Field(1.0, gt=0.0)
    value: float = 1.0


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Literal["construct", "approx-sweep", "regress", "rate-sweep", "report"]
    target: TargetSpec = TargetSpec()
    fit: FitConfig = FitConfig()
    estimators: List[str] = ["wavelet"]
    builder: str = "mult"
    builder_params: Dict[str, Union[str, float, int, List[str]]] = {}
    activation: str = "relu"
    slope: float = Field(0.2, ge=0.0)
    sigma: float = Field(0.1, ge=0.0)
    n: int = Field(1024, ge=1)
    n_grid: List[int] = [256, 512, 1024, 2048]
    reps: int = Field(10, ge=1)
    sweep: Literal["smooth", "indicator"] = "smooth"
    eps_grid: List[float] = []
    seed: int = 0
    output_dir: str = "results"
    points: Optional[int] = Field(None, ge=1024)
    workers: int = Field(4, ge=1)
    backend: Literal["threads", "celery"] = "threads"
    strict: bool = False
    bound: Optional[float] = None
    plot: bool = True
    save: bool = False

    @field_validator("estimators")
    @classmethod
    def _known_estimators(cls, value: List[str]) -> List[str]:
        unknown = [v for v in value if v not in ESTIMATORS]
        if unknown:
            raise ValueError(f"unknown estimators {unknown}; choose from {', '.join(ESTIMATORS)}")
        if not value:
            raise ValueError("at least one estimator is required")
        return value

    @field_validator("n_grid")
    @classmethod
    def _increasing(cls, value: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(value, value[1:])) or any(v < 1 for v in value):
            raise ValueError("n grid must be positive and strictly increasing")
        return value

    @field_validator("eps_grid")
    @classmethod
    def _decreasing(cls, value: List[float]) -> List[float]:
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("ε grid must be strictly decreasing")
        return value

    @model_validator(mode="after")
    def _grid_length(self) -> "RunConfig":
        if self.command == "rate-sweep" and len(self.n_grid) < 3:
            raise ValueError("a rate sweep needs at least three sample sizes")
        return self


# Flat run-file / flag keys and the nested fields they set.
FIELD_MAP: Dict[str, Sequence[Tuple[str, ...]]] = {
    "target": [("target", "name")],
    "alpha": [("target", "alpha")],
    "beta": [("target", "beta")],
    "dim": [("target", "dim")],
    "m_pieces": [("target", "m_pieces")],
    "j_boundaries": [("target", "j_boundaries")],
    "radius": [("target", "radius")],
    "value": [("target", "value")],
    "kernel": [("fit", "kernel_ridge", "kernel")],
    "bandwidth": [("fit", "kernel_ridge", "bandwidth")],
    "bandwidth_grid": [("fit", "kernel_ridge", "bandwidth_grid")],
    "ridge": [("fit", "kernel_ridge", "ridge")],
    "ridge_grid": [("fit", "kernel_ridge", "ridge_grid")],
    "tau": [("fit", "wavelet", "tau"), ("fit", "curvelet", "tau")],
    "tau_grid": [("fit", "wavelet", "tau_grid"), ("fit", "curvelet", "tau_grid")],
    "grid_size": [("fit", "curvelet", "grid_size")],
    "delta1": [("fit", "curvelet", "delta1")],
    "delta2": [("fit", "curvelet", "delta2")],
    "width": [("fit", "dnn", "width")],
    "depth": [("fit", "dnn", "depth")],
    "iterations": [("fit", "dnn", "iterations")],
    "learning_rate": [("fit", "dnn", "learning_rate")],
    "momentum": [("fit", "dnn", "momentum")],
    "restarts": [("fit", "dnn", "restarts")],
    "clip": [("fit", "dnn", "clip")],
    "budget_width": [("fit", "dnn", "budget_width")],
    "gap_target": [("fit", "dnn", "gap_target")],
    "tune": [("fit", "tune")],
    "activation": [("activation",), ("fit", "dnn", "activation")],
    "slope": [("slope",), ("fit", "dnn", "slope")],
}
TOP_LEVEL = (
    "estimators", "builder", "sigma", "n", "n_grid", "reps", "sweep", "eps_grid", "seed",
    "output_dir", "points", "workers", "backend", "strict", "bound", "plot", "save",
)
BUILDER_KEYS = (
    "m", "T", "dprime", "gamma", "eps", "eps1", "eps2", "t", "side", "center", "delta",
    "index", "function", "h", "axis", "sign", "D",
)
LIST_KEYS = {"n_grid", "eps_grid", "estimators", "tau_grid", "ridge_grid", "bandwidth_grid", "center"}
ENV_KEYS = {"SINGLAB_SEED": "seed", "SINGLAB_OUTPUT_DIR": "output_dir", "SINGLAB_WORKERS": "workers"}


def _split(key: str, value: Any) -> Any:
    if key in LIST_KEYS and isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


def _assign(tree: Dict[str, Any], key: str, value: Any) -> None:
    value = _split(key, value)
    if key in FIELD_MAP:
        for path in FIELD_MAP[key]:
            node = tree
            for part in path[:-1]:
                node = node.setdefault(part, {})
            node[path[-1]] = value
    elif key in TOP_LEVEL:
        tree[key] = value
    elif key in BUILDER_KEYS:
        tree.setdefault("builder_params", {})[key] = value
    else:
        raise ConfigurationError(f"unknown configuration key: {key}")


def read_run_file(path: str) -> Dict[str, Optional[str]]:
    if not os.path.isfile(path):
        raise ConfigurationError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {key.strip().lower(): value for key, value in values.items()}


def resolve_config(command: str, flags: Optional[Mapping[str, Any]] = None,
                   config_path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Merge defaults < environment < run file < flags into a validated RunConfig."""
    environ = os.environ if environ is None else environ
    tree: Dict[str, Any] = {"command": command}
    for env_key, key in ENV_KEYS.items():
        if environ.get(env_key) not in (None, ""):
            _assign(tree, key, environ[env_key])
    if config_path:
        for key, value in read_run_file(config_path).items():
            if value is not None:
                _assign(tree, key, value)
    for key, value in (flags or {}).items():
        if value is not None:
            _assign(tree, key, value)
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigurationError(f"invalid configuration: {problems}") from exc
