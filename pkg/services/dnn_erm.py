"""
DNN empirical risk minimization for singlab.
Full-batch gradient descent with momentum on a plain numpy MLP, with
checkpoint rollback, step-size halving and random restarts. The fitted
model is exported as a clipped Network so it shares evaluation,
serialization and size metrics with the constructed approximators.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import structlog

from models.activation import Activation, make_activation
from models.config import DnnConfig
from models.errors import DivergenceError, ParameterError
from models.functions import Dataset
from models.network import Network
from models.predictor import Predictor
from services.rng import stream

logger = structlog.get_logger(__name__)

CHECKPOINTS = 20
GAP_WINDOW = 0.05

Params = List[Tuple[np.ndarray, np.ndarray]]


class DnnPredictor(Predictor):
    kind = "dnn"

    def __init__(self, network: Network, domain, metadata=None):
        super().__init__(domain, metadata)
        self.network = network

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.network(points).reshape(-1)


@dataclass
class TrainingRun:
    params: Params
    loss: float
    history: List[float] = field(default_factory=list)
    checkpoints: List[float] = field(default_factory=list)
    learning_rate: float = 0.0
    rollbacks: int = 0
    iterations_run: int = 0
    stopped_early: bool = False

    @property
    def gap(self) -> float:
        """Δ̂: loss decrease over the final 5% of accepted iterations."""
        return window_gap(self.history)


def window_gap(history: List[float]) -> float:
    if len(history) < 2:
        return 0.0
    start = history[int((1.0 - GAP_WINDOW) * (len(history) - 1))]
    return max(start - history[-1], 0.0)


def _copy(params: Params) -> Params:
    return [(W.copy(), b.copy()) for W, b in params]


class DnnTrainer:
    def __init__(self, config: DnnConfig):
        self.config = config
        self.activation: Activation = make_activation(config.activation, config.slope)

    # --- model ---

    def _init_params(self, in_dim: int, width: int, mean: float, seed: int, restart: int) -> Params:
        rng = stream(seed, "init", restart)
        params: Params = []
        fan_in = in_dim
        for _ in range(self.config.depth):
            limit = np.sqrt(6.0 / fan_in)
            params.append((rng.uniform(-limit, limit, size=(width, fan_in)), np.zeros(width)))
            fan_in = width
        # zero readout: training starts from the constant fit mean(Y)
        params.append((np.zeros((1, fan_in)), np.array([mean])))
        return params

    def _forward(self, params: Params, U: np.ndarray):
        acts, pres = [U], []
        a = U
        for W, b in params[:-1]:
            z = a @ W.T + b
            pres.append(z)
            a = self.activation(z)
            acts.append(a)
        W, b = params[-1]
        return (a @ W.T + b)[:, 0], acts, pres

    def _loss(self, params: Params, U: np.ndarray, Y: np.ndarray) -> float:
        out, _, _ = self._forward(params, U)
        with np.errstate(over="ignore", invalid="ignore"):
            return float(np.mean((out - Y) ** 2))

    def _gradients(self, params: Params, U: np.ndarray, Y: np.ndarray) -> Tuple[float, Params]:
        out, acts, pres = self._forward(params, U)
        residual = out - Y
        with np.errstate(over="ignore", invalid="ignore"):
            loss = float(np.mean(residual ** 2))
        delta = (2.0 / Y.shape[0]) * residual[:, None]
        grads: Params = [None] * len(params)
        for i in reversed(range(len(params))):
            W, _ = params[i]
            grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
            if i > 0:
                delta = (delta @ W) * self.activation.derivative(pres[i - 1], 1)
        return loss, grads

    # --- optimization ---

    def _train(self, U: np.ndarray, Y: np.ndarray, width: int, seed: int, restart: int) -> TrainingRun:
        cfg = self.config
        params = self._init_params(U.shape[1], width, float(np.mean(Y)), seed, restart)
        velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        lr = cfg.learning_rate
        every = max(1, cfg.iterations // CHECKPOINTS)

        stable = _copy(params)
        stable_loss = self._loss(params, U, Y)
        history = [stable_loss]
        stable_len = 1
        checkpoints = [stable_loss]
        rollbacks = 0
        iterations_run, stopped_early = cfg.iterations, False

        for it in range(1, cfg.iterations + 1):
            loss, grads = self._gradients(params, U, Y)
            if np.isfinite(loss):
                history.append(loss)
                for (W, b), (vW, vb), (gW, gb) in zip(params, velocity, grads):
                    vW *= cfg.momentum
                    vW -= lr * gW
                    vb *= cfg.momentum
                    vb -= lr * gb
                    W += vW
                    b += vb
            if it % every and it != cfg.iterations and np.isfinite(loss):
                continue

            current = self._loss(params, U, Y)
            if np.isfinite(current) and current <= stable_loss:
                stable, stable_loss, stable_len = _copy(params), current, len(history)
                checkpoints.append(current)
                if (cfg.gap_target is not None and it >= 2 * every
                        and window_gap(history + [current]) < cfg.gap_target):
                    iterations_run, stopped_early = it, True
                    logger.debug("dnn_gap_target_met", restart=restart, iteration=it, loss=current)
                    break
                continue
            # rollback to the last checkpoint with a halved step
            rollbacks += 1
            params = _copy(stable)
            velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
            del history[stable_len:]
            lr *= 0.5
            logger.debug("dnn_rollback", restart=restart, iteration=it, loss=current, learning_rate=lr)
            if lr < cfg.lr_floor:
                raise DivergenceError(
                    f"training diverged at iteration {it} (loss {current}) with step size below {cfg.lr_floor}",
                    last_stable=stable, loss=stable_loss,
                )

        history.append(stable_loss)
        return TrainingRun(params=stable, loss=stable_loss, history=history, checkpoints=checkpoints,
                           learning_rate=lr, rollbacks=rollbacks,
                           iterations_run=iterations_run, stopped_early=stopped_early)

    # --- export ---

    def _export(self, params: Params, lower: np.ndarray, upper: np.ndarray, clip: float) -> Network:
        """Fold the input standardization u = 2(x − lower)/(upper − lower) − 1 into layer one."""
        scale = 2.0 / (upper - lower)
        W, b = params[0]
        first = (W * scale, b - W @ (scale * lower + 1.0))
        layers = [first] + [(W.copy(), b.copy()) for W, b in params[1:]]
        return Network(layers, self.activation, clip=clip)

    def fit(self, data: Dataset, seed: int, width: Optional[int] = None) -> DnnPredictor:
        if data.n < 1:
            raise ParameterError("DNN fit needs at least one sample")
        width = width or self.config.width
        lower = np.asarray(data.domain[0], dtype=float)
        upper = np.asarray(data.domain[1], dtype=float)
        U = 2.0 * (data.X - lower) / (upper - lower) - 1.0
        Y = np.asarray(data.Y, dtype=float)
        clip = self.config.clip or float(data.target.get("radius") or max(np.max(np.abs(Y)), 1e-12))

        best: Optional[TrainingRun] = None
        best_restart = -1
        failure: Optional[DivergenceError] = None
        for restart in range(self.config.restarts):
            try:
                run = self._train(U, Y, width, seed, restart)
            except DivergenceError as exc:
                logger.warning("dnn_restart_diverged", restart=restart, error=str(exc))
                if failure is None or exc.loss < failure.loss:
                    failure = exc
                continue
            if best is None or run.loss < best.loss:
                best, best_restart = run, restart

        if best is None:
            network = self._export(failure.last_stable, lower, upper, clip)
            raise DivergenceError(str(failure), last_stable=DnnPredictor(network, data.domain), loss=failure.loss)

        network = self._export(best.params, lower, upper, clip)
        metrics = network.metrics()
        metadata = {
            "final_loss": best.loss,
            "gap": best.gap,
            "gap_target": self.config.gap_target,
            "gap_met": None if self.config.gap_target is None else best.gap <= self.config.gap_target,
            "iterations": self.config.iterations,
            "iterations_run": best.iterations_run,
            "stopped_early": best.stopped_early,
            "restarts": self.config.restarts,
            "best_restart": best_restart,
            "rollbacks": best.rollbacks,
            "learning_rate": best.learning_rate,
            "checkpoints": best.checkpoints,
            "width": width,
            "depth": self.config.depth,
            "activation": self.activation.kind,
            "clip": clip,
            "seed": seed,
            "L": metrics.depth,
            "S": metrics.sparsity,
            "B": metrics.magnitude,
        }
        logger.info("dnn_fit_done", n=data.n, width=width, loss=best.loss, gap=best.gap, S=metrics.sparsity)
        return DnnPredictor(network, data.domain, metadata)


def fit_dnn_erm(data: Dataset, config: DnnConfig, seed: int, width: Optional[int] = None) -> DnnPredictor:
    return DnnTrainer(config).fit(data, seed, width)
