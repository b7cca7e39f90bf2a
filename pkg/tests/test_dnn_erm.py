import numpy as np
import pytest
from pydantic import ValidationError

from models.config import DnnConfig
from models.errors import DivergenceError
from services.dnn_erm import DnnPredictor, DnnTrainer, TrainingRun, fit_dnn_erm
from services.funcgen import gen_dataset, named_target


@pytest.fixture(scope="module")
def smooth_data():
    return gen_dataset(named_target("smooth-sine"), 128, 0.05, seed=1)


def test_gradients_match_finite_differences():
    trainer = DnnTrainer(DnnConfig(width=3, depth=2, activation="softplus"))
    rng = np.random.default_rng(0)
    U = rng.uniform(-1.0, 1.0, (16, 2))
    Y = rng.standard_normal(16)
    params = trainer._init_params(2, 3, 0.0, seed=0, restart=0)
    params[-1] = (rng.standard_normal((1, 3)), np.array([0.1]))
    _, grads = trainer._gradients(params, U, Y)

    h = 1e-6
    for layer, (W, _) in enumerate(params):
        for index in [(0, 0), (W.shape[0] - 1, W.shape[1] - 1)]:
            original = W[index]
            W[index] = original + h
            up = trainer._loss(params, U, Y)
            W[index] = original - h
            down = trainer._loss(params, U, Y)
            W[index] = original
            assert grads[layer][0][index] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)


def test_fit_reports_metadata_and_monotone_checkpoints(smooth_data):
    config = DnnConfig(width=8, depth=2, iterations=200, restarts=2, learning_rate=0.05)
    predictor = fit_dnn_erm(smooth_data, config, seed=4)
    assert isinstance(predictor, DnnPredictor)
    meta = predictor.metadata
    for key in ("final_loss", "gap", "checkpoints", "width", "depth", "L", "S", "B", "clip"):
        assert key in meta
    assert meta["width"] == 8 and meta["L"] == 3
    checkpoints = meta["checkpoints"]
    assert all(b <= a for a, b in zip(checkpoints, checkpoints[1:]))
    assert meta["final_loss"] <= checkpoints[0]
    assert meta["gap"] >= 0.0


def test_exported_network_reproduces_training_loss(smooth_data):
    config = DnnConfig(width=6, depth=2, iterations=100, restarts=1, clip=100.0)
    predictor = fit_dnn_erm(smooth_data, config, seed=0)
    loss = float(np.mean((predictor.predict(smooth_data.X) - smooth_data.Y) ** 2))
    assert loss == pytest.approx(predictor.metadata["final_loss"], rel=1e-9, abs=1e-12)


def test_predictions_are_clipped(smooth_data):
    config = DnnConfig(width=6, depth=2, iterations=50, restarts=1, clip=0.25)
    predictor = fit_dnn_erm(smooth_data, config, seed=0)
    grid = np.random.default_rng(3).random((500, 2))
    assert np.all(np.abs(predictor.predict(grid)) <= 0.25)


def test_fit_is_deterministic(smooth_data):
    config = DnnConfig(width=6, depth=2, iterations=60, restarts=2)
    a = fit_dnn_erm(smooth_data, config, seed=5)
    b = fit_dnn_erm(smooth_data, config, seed=5)
    assert np.array_equal(a.predict(smooth_data.X), b.predict(smooth_data.X))


def test_width_override(smooth_data):
    predictor = fit_dnn_erm(smooth_data, DnnConfig(width=4, iterations=10, restarts=1), seed=0, width=7)
    assert predictor.metadata["width"] == 7


def test_divergence_keeps_last_stable_predictor(smooth_data):
    config = DnnConfig(width=4, depth=2, iterations=20, restarts=1, learning_rate=1e6, lr_floor=1e3)
    with pytest.raises(DivergenceError) as info:
        fit_dnn_erm(smooth_data, config, seed=0)
    stable = info.value.last_stable
    assert isinstance(stable, DnnPredictor)
    assert np.all(np.isfinite(stable.predict(smooth_data.X)))


def test_gap_uses_final_window():
    run = TrainingRun(params=[], loss=0.5, history=[float(v) for v in np.linspace(2.0, 0.5, 101)])
    assert run.gap == pytest.approx(0.075)
    assert TrainingRun(params=[], loss=1.0, history=[1.0]).gap == 0.0


@pytest.fixture(scope="module")
def constant_data():
    return gen_dataset(named_target("constant"), 64, 0.0, seed=2)


def test_constant_target_is_fit_exactly(constant_data):
    predictor = fit_dnn_erm(constant_data, DnnConfig(width=4, depth=2, iterations=100, restarts=1), seed=0)
    assert predictor.metadata["final_loss"] <= 1e-6
    assert predictor.metadata["gap_met"] is None
    assert not predictor.metadata["stopped_early"]
    assert predictor.metadata["iterations_run"] == 100


def test_gap_target_stops_restart_early(constant_data):
    config = DnnConfig(width=4, depth=2, iterations=400, restarts=1, gap_target=1e-3)
    meta = fit_dnn_erm(constant_data, config, seed=0).metadata
    assert meta["gap_target"] == 1e-3
    assert meta["gap_met"] is True
    assert meta["stopped_early"]
    assert meta["iterations_run"] < 400
    assert meta["final_loss"] <= 1e-6


def test_gap_met_agrees_with_reported_gap(smooth_data):
    config = DnnConfig(width=6, depth=2, iterations=200, restarts=2, gap_target=10.0)
    meta = fit_dnn_erm(smooth_data, config, seed=3).metadata
    assert meta["stopped_early"]
    assert meta["gap_met"] == (meta["gap"] <= 10.0)


def test_gap_target_must_be_positive():
    with pytest.raises(ValidationError):
        DnnConfig(gap_target=0.0)
