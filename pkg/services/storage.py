"""
Result storage service for singlab.
Handles writing CSV tables, JSON summaries and manifests, SVG log-log plots,
and saving/loading fitted predictors and datasets under one output directory.
"""

import json
import os
import re
from typing import Any, Dict, Iterable, List, Optional, Tuple

import matplotlib
import numpy as np
import pandas as pd
import structlog
from matplotlib.figure import Figure
from pandas.errors import EmptyDataError, ParserError
from pydantic import ValidationError

from models.errors import ConfigurationError, ReportParseError
from models.functions import Dataset, make_dataset
from models.network import dumps, loads
from models.predictor import Predictor
from models.results import ApproxReport, RateRow, RateTable
from services.curvelet import CurveletPredictor
from services.dnn_erm import DnnPredictor
from services.kernel_ridge import KernelRidgePredictor
from services.wavelet import WaveletPredictor

logger = structlog.get_logger(__name__)

RATE_COLUMNS = ["estimator", "target", "alpha", "beta", "D", "n", "reps", "mean_sq_err", "stderr", "failed", "choice"]
APPROX_COLUMNS = ["builder", "target", "S", "L", "B", "measured_error", "claimed_bound", "within_bound", "params"]

# Stable ids and no creation date inside SVG output.
matplotlib.rcParams["svg.hashsalt"] = "singlab"


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


class ResultStore:
    def __init__(self, output_dir: str):
        self.output_dir = output_dir

    def path(self, *parts: str) -> str:
        return os.path.join(self.output_dir, *parts)

    def _ensure(self, directory: Optional[str] = None) -> str:
        directory = directory or self.output_dir
        try:
            os.makedirs(directory, exist_ok=True)
        except OSError as exc:
            raise ConfigurationError(f"cannot create output directory {directory}: {exc}") from exc
        return directory

    # --- generic writers ---

    def write_rows(self, name: str, rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> str:
        self._ensure()
        path = self.path(name)
        frame = pd.DataFrame(rows, columns=columns)
        frame.to_csv(path, index=False, lineterminator="\n")
        logger.debug("csv_written", path=path, rows=len(frame))
        return path

    def write_json(self, name: str, document: Dict[str, Any], directory: Optional[str] = None) -> str:
        directory = self._ensure(directory)
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(_plain(document), handle, sort_keys=True, indent=2)
            handle.write("\n")
        return path

    def read_json(self, path: str) -> Dict[str, Any]:
        if not os.path.isfile(path):
            raise ConfigurationError(f"missing file: {path}")
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)

    def write_manifest(self, command: str, config: Dict[str, Any], version: str, extra: Optional[Dict[str, Any]] = None) -> str:
        document = {"command": command, "version": version, "seed": config.get("seed"), "config": config}
        document.update(extra or {})
        return self.write_json(f"manifest_{command.replace('-', '_')}.json", document)

    # --- construction reports ---

    def write_approx_reports(self, name: str, reports: Iterable[ApproxReport]) -> str:
        return self.write_rows(name, [report.to_row() for report in reports])

    def write_network(self, report: ApproxReport, name: str = "network.json") -> str:
        self._ensure()
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(dumps(report.network))
        return path

    def write_approx_table(self, table: RateTable, reports: List[ApproxReport]) -> Tuple[str, str]:
        rows = []
        for report in reports:
            row = report.to_row()
            rows.append({column: row.get(column) for column in APPROX_COLUMNS})
        stem = f"approx_{table.estimator}"
        csv_path = self.write_rows(f"{stem}.csv", rows, APPROX_COLUMNS)
        json_path = self.write_json(f"{stem}.json", table.summary())
        return csv_path, json_path

    # --- rate tables ---

    @staticmethod
    def rate_stem(table: RateTable) -> str:
        return f"rate_{table.estimator}_{table.target}".replace("/", "-")

    def write_rate_table(self, table: RateTable, plot: bool = False) -> Dict[str, str]:
        rows = [
            {
                "estimator": table.estimator,
                "target": table.target,
                "alpha": table.alpha,
                "beta": table.beta,
                "D": table.D,
                "n": row.n,
                "reps": row.reps,
                "mean_sq_err": row.mean_error,
                "stderr": row.stderr,
                "failed": row.failed,
                "choice": row.choice,
            }
            for row in table.rows
        ]
        stem = self.rate_stem(table)
        paths = {
            "csv": self.write_rows(f"{stem}.csv", rows, RATE_COLUMNS),
            "json": self.write_json(f"{stem}.json", table.summary()),
        }
        if plot:
            paths["svg"] = self.plot_table(table, f"{stem}.svg")
        return paths

    def plot_table(self, table: RateTable, name: str) -> str:
        """Log-log plot of mean error with the reference power law through the first row."""
        self._ensure()
        path = self.path(name)
        xs = np.array([row.n for row in table.rows], dtype=float)
        ys = np.array([row.mean_error for row in table.rows], dtype=float)
        fig = Figure(figsize=(5, 4))
        ax = fig.subplots()
        keep = ys > 0
        ax.loglog(xs[keep], ys[keep], "o-", label=f"{table.estimator} (slope {table.slope:.3f})"
                  if table.slope is not None else table.estimator)
        if table.theoretical_exponent is not None and keep.any():
            x0, y0 = xs[keep][0], ys[keep][0]
            ax.loglog(xs, y0 * (xs / x0) ** (-table.theoretical_exponent), "--",
                      label=f"reference slope {-table.theoretical_exponent:.3f}")
        ax.set_xlabel(table.x_name)
        ax.set_ylabel("squared L2 error" if table.error_kind == "squared-l2" else "L2 error")
        ax.set_title(f"{table.target}")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        return path

    def rate_table_paths(self) -> List[str]:
        if not os.path.isdir(self.output_dir):
            raise ConfigurationError(f"output directory not found: {self.output_dir}")
        names = sorted(name for name in os.listdir(self.output_dir)
                       if name.startswith("rate_") and name.endswith(".csv"))
        return [self.path(name) for name in names]

    def read_rate_table(self, path: str) -> RateTable:
        """Parse a rate CSV back into a RateTable; malformed rows name their line."""
        try:
            frame = pd.read_csv(path, float_precision="round_trip", dtype={"choice": str}, keep_default_na=False)
        except EmptyDataError as exc:
            raise ReportParseError(path, 1, "empty file") from exc
        except ParserError as exc:
            match = re.search(r"line (\d+)", str(exc))
            raise ReportParseError(path, int(match.group(1)) if match else 0, str(exc)) from exc
        missing = [c for c in RATE_COLUMNS if c not in frame.columns]
        if missing:
            raise ReportParseError(path, 1, f"missing columns {missing}")
        if frame.empty:
            raise ReportParseError(path, 2, "no data rows")

        rows: List[RateRow] = []
        for position, record in enumerate(frame.to_dict("records")):
            line = position + 2
            try:
                rows.append(RateRow(n=int(record["n"]), reps=int(record["reps"]),
                                    mean_error=float(record["mean_sq_err"]), stderr=float(record["stderr"]),
                                    failed=int(record["failed"]), choice=str(record["choice"])))
            except (TypeError, ValueError, ValidationError) as exc:
                raise ReportParseError(path, line, f"bad row: {exc}") from exc
        first = frame.iloc[0]
        try:
            return RateTable(estimator=str(first["estimator"]), target=str(first["target"]),
                             alpha=float(first["alpha"]), beta=float(first["beta"]), D=int(first["D"]), rows=rows)
        except (TypeError, ValueError, ValidationError) as exc:
            raise ReportParseError(path, 2, f"bad header values: {exc}") from exc

    # --- predictors ---

    def save_predictor(self, predictor: Predictor, name: str = "predictor") -> str:
        directory = self._ensure(self.path(name))
        header = {"kind": predictor.kind, "domain": [list(predictor.domain[0]), list(predictor.domain[1])],
                  "metadata": predictor.metadata}
        if isinstance(predictor, DnnPredictor):
            with open(os.path.join(directory, "network.json"), "w", encoding="utf-8") as handle:
                handle.write(dumps(predictor.network))
        elif isinstance(predictor, KernelRidgePredictor):
            header.update(predictor.descriptor())
            columns = [f"x_{d + 1}" for d in range(predictor.dim)]
            pd.DataFrame(predictor.design, columns=columns).to_csv(
                os.path.join(directory, "design.csv"), index=False, lineterminator="\n")
            pd.DataFrame({"dual": predictor.dual}).to_csv(
                os.path.join(directory, "dual.csv"), index=False, lineterminator="\n")
        elif isinstance(predictor, WaveletPredictor):
            header.update(tau=predictor.tau, dim=predictor.dim)
            columns = [f"k_{d + 1}" for d in range(predictor.dim)]
            records = [dict(zip(columns, index), value=value) for index, value in predictor.coefficient_rows()]
            pd.DataFrame(records, columns=columns + ["value"]).to_csv(
                os.path.join(directory, "coefficients.csv"), index=False, lineterminator="\n")
        elif isinstance(predictor, CurveletPredictor):
            header.update(predictor.descriptor())
            pd.DataFrame(predictor.coefficient_rows(), columns=["j", "l", "k1", "k2", "value"]).to_csv(
                os.path.join(directory, "coefficients.csv"), index=False, lineterminator="\n")
        else:
            raise ConfigurationError(f"cannot save predictor of kind {predictor.kind!r}")
        self.write_json("predictor.json", header, directory)
        logger.info("predictor_saved", kind=predictor.kind, directory=directory)
        return directory

    def load_predictor(self, name: str = "predictor") -> Predictor:
        directory = self.path(name)
        header = self.read_json(os.path.join(directory, "predictor.json"))
        kind, metadata = header["kind"], header.get("metadata", {})
        domain = (tuple(header["domain"][0]), tuple(header["domain"][1]))
        if kind == "dnn":
            with open(os.path.join(directory, "network.json"), encoding="utf-8") as handle:
                return DnnPredictor(loads(handle.read()), domain, metadata)
        if kind == "kernel-ridge":
            design = _read_csv(os.path.join(directory, "design.csv")).to_numpy(dtype=float)
            dual = _read_csv(os.path.join(directory, "dual.csv"))["dual"].to_numpy(dtype=float)
            return KernelRidgePredictor(design, dual, header["kernel"], header["bandwidth"], header["ridge"],
                                        domain, metadata)
        if kind == "wavelet":
            frame = _read_csv(os.path.join(directory, "coefficients.csv"))
            index_columns = [c for c in frame.columns if c.startswith("k_")]
            rows = zip(frame[index_columns].to_numpy(dtype=int), frame["value"].to_numpy(dtype=float))
            return WaveletPredictor.from_rows(list(rows), int(header["tau"]), int(header["dim"]), metadata)
        if kind == "curvelet":
            frame = _read_csv(os.path.join(directory, "coefficients.csv"))
            rows = frame[["j", "l", "k1", "k2", "value"]].itertuples(index=False, name=None)
            return CurveletPredictor.from_rows(list(rows), header)
        raise ConfigurationError(f"unknown predictor kind {kind!r} in {directory}")

    # --- datasets ---

    def save_dataset(self, data: Dataset, name: str = "dataset") -> str:
        self._ensure()
        columns = [f"x_{d + 1}" for d in range(data.dim)]
        frame = pd.DataFrame(data.X, columns=columns)
        frame["y"] = data.Y
        csv_path = self.path(f"{name}.csv")
        frame.to_csv(csv_path, index=False, lineterminator="\n")
        self.write_json(f"{name}.json", {"seed": data.seed, "sigma": data.sigma,
                                         "domain": [list(data.domain[0]), list(data.domain[1])],
                                         "target": data.target})
        return csv_path

    def load_dataset(self, name: str = "dataset") -> Dataset:
        csv_path = self.path(f"{name}.csv")
        if not os.path.isfile(csv_path):
            raise ConfigurationError(f"missing dataset: {csv_path}")
        frame = _read_csv(csv_path)
        side = self.read_json(self.path(f"{name}.json"))
        X = frame[[c for c in frame.columns if c.startswith("x_")]].to_numpy(dtype=float)
        return make_dataset(X, frame["y"].to_numpy(dtype=float), side["sigma"], side["seed"], side["domain"],
                            side.get("target"))
