import numpy as np
import pytest

from models.errors import ParameterError
from services.quadrature import (
    MIN_POINTS,
    halton_points,
    qmc_square_error,
    simpson_square_error,
    sup_error,
    tensor_grid,
)
from services.rng import cell_seed, derive_seed, stream


def zero(x):
    return np.zeros(x.shape[0])


def one(x):
    return np.ones(x.shape[0])


def test_halton_points_are_deterministic_and_in_box():
    a = halton_points(2, 1024, [0.0, -1.0], [2.0, 1.0])
    b = halton_points(2, 1024, [0.0, -1.0], [2.0, 1.0])
    assert np.array_equal(a, b)
    assert np.all(a[:, 0] >= 0.0) and np.all(a[:, 0] <= 2.0)
    assert np.all(a[:, 1] >= -1.0) and np.all(a[:, 1] <= 1.0)


def test_qmc_constant_difference():
    estimate = qmc_square_error(one, zero, [0.0, 0.0], [2.0, 1.0], MIN_POINTS)
    assert estimate.mean_square == pytest.approx(1.0)
    assert estimate.volume == pytest.approx(2.0)
    assert estimate.l2 == pytest.approx(np.sqrt(2.0))
    assert estimate.model_error == pytest.approx(0.0, abs=1e-9)


def test_qmc_linear_function():
    estimate = qmc_square_error(lambda x: x[:, 0], zero, [0.0, 0.0], [1.0, 1.0], 2 ** 14)
    assert estimate.mean_square == pytest.approx(1.0 / 3.0, abs=1e-3)


def test_qmc_needs_minimum_points():
    with pytest.raises(ParameterError):
        qmc_square_error(one, zero, [0.0], [1.0], MIN_POINTS - 1)


def test_simpson_is_exact_for_polynomials():
    assert simpson_square_error(lambda x: x[:, 0], zero, 0.0, 1.0, 1000) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert simpson_square_error(lambda x: x[:, 0], zero, 0.0, 1.0, 999) == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_tensor_grid_and_sup_error():
    grid = tensor_grid([0.0, 0.0], [1.0, 1.0], 3)
    assert grid.shape == (9, 2)
    assert sup_error(lambda x: x.sum(axis=1), zero, grid) == pytest.approx(2.0)


def test_streams_are_independent_and_reproducible():
    assert np.array_equal(stream(7, "design").random(5), stream(7, "design").random(5))
    assert not np.array_equal(stream(7, "design").random(5), stream(7, "noise").random(5))
    assert not np.array_equal(stream(7, "init", 0).random(5), stream(7, "init", 1).random(5))


def test_cell_seeds():
    assert cell_seed(0, 256, 1) == cell_seed(0, 256, 1)
    assert cell_seed(0, 256, 1) != cell_seed(0, 256, 2)
    assert cell_seed(0, 256, 1) != cell_seed(1, 256, 1)
    assert derive_seed(3, "partition", 0) != derive_seed(3, "partition", 1)
