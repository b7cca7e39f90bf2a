import numpy as np
import pytest

from models.config import CurveletConfig
from models.errors import ConfigurationError, DomainError
from services import curvelet
from services.curvelet import (
    CurveletPredictor,
    analysis,
    check_grid,
    fit_curvelet,
    frame_size,
    frame_windows,
    lowpass,
    pixel_index,
    population_coefficients,
    synthesis,
)
from services.funcgen import gen_dataset, named_target


def test_window_partition_is_tight():
    grid, tau = 64, 2
    freqs = np.fft.fftfreq(grid) * grid
    xi1, xi2 = np.meshgrid(freqs, freqs, indexing="ij")
    total = sum(chi ** 2 for _, _, chi in frame_windows(grid, tau))
    assert np.allclose(total, lowpass(np.hypot(xi1, xi2) / 4 ** tau) ** 2, atol=1e-12)


def test_window_count():
    assert len(frame_windows(64, 2)) == 2 ** 3 - 1
    assert frame_size(2, 32) == 7 * 32 * 32
    assert frame_size(1, 32, 2, 1) == 3 * 16 * 32


def test_synthesis_is_adjoint_of_analysis():
    rng = np.random.default_rng(0)
    image = rng.standard_normal((32, 32))
    planes = rng.standard_normal((3, 32, 32))
    left = float(np.sum(analysis(image, 1) * planes))
    right = float(np.sum(image * synthesis(planes, 1)))
    assert left == pytest.approx(right, rel=1e-10)


def test_grid_checks():
    check_grid(16, 1)
    with pytest.raises(ConfigurationError):
        check_grid(15, 0)
    with pytest.raises(ConfigurationError):
        check_grid(16, 2)


def test_pixel_index_edges():
    assert list(pixel_index(np.array([-1.0, 0.0, 1.0]), 8)) == [0, 4, 7]


def test_population_coefficients_of_constant_reconstruct_it():
    grid, tau = 32, 1
    coefficients = population_coefficients(lambda x: np.ones(x.shape[0]), tau, grid)
    predictor = CurveletPredictor(coefficients, tau, grid)
    query = np.array([[-0.9, -0.9], [0.0, 0.3], [0.99, -0.5]])
    assert np.allclose(predictor.predict(query), 1.0, atol=1e-10)


def test_fit_shape_and_metadata():
    data = gen_dataset(named_target("quadrant"), 500, 0.1, seed=1)
    config = CurveletConfig(tau=1, grid_size=32, delta1=2)
    predictor = fit_curvelet(data, config)
    assert predictor.coefficients.shape == (3, 16, 32)
    assert predictor.metadata["frame_size"] == 3 * 16 * 32
    assert predictor.metadata["windows"] == curvelet.WINDOW_FAMILY


def test_fit_needs_square_domain():
    data = gen_dataset(named_target("graph-indicator"), 50, 0.1, seed=1)
    with pytest.raises(DomainError):
        fit_curvelet(data, CurveletConfig(grid_size=32, tau=1))


def test_fit_rejects_small_grid():
    data = gen_dataset(named_target("quadrant"), 50, 0.1, seed=1)
    with pytest.raises(ConfigurationError):
        fit_curvelet(data, CurveletConfig(grid_size=16, tau=2))


def test_rows_round_trip():
    data = gen_dataset(named_target("quadrant"), 300, 0.1, seed=3)
    predictor = fit_curvelet(data, CurveletConfig(tau=1, grid_size=16, delta2=2))
    restored = CurveletPredictor.from_rows(predictor.coefficient_rows(), predictor.descriptor())
    query = np.random.default_rng(1).uniform(-1.0, 1.0, (50, 2))
    assert np.array_equal(restored.predict(query), predictor.predict(query))
