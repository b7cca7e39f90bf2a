import numpy as np
import pytest

from models.config import KernelRidgeConfig
from models.errors import DomainError, ParameterError
from services.funcgen import gen_dataset, named_target
from services.kernel_ridge import fit_kernel_ridge, kernel_gamma, kernel_matrix


@pytest.fixture(scope="module")
def data():
    return gen_dataset(named_target("graph-indicator"), 96, 0.1, seed=2)


def test_kernel_gamma():
    assert kernel_gamma("gaussian", 0.5) == pytest.approx(2.0)
    assert kernel_gamma("laplacian", 0.5) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        kernel_gamma("gaussian", 0.0)
    with pytest.raises(ParameterError):
        kernel_gamma("cosine", 1.0)


def test_kernel_matrix_values():
    a = np.array([[0.0, 0.0]])
    b = np.array([[0.3, 0.4]])
    assert kernel_matrix("gaussian", 0.5, a, b)[0, 0] == pytest.approx(np.exp(-0.25 / 0.5))
    assert kernel_matrix("laplacian", 0.5, a, b)[0, 0] == pytest.approx(np.exp(-0.7 / 0.5))


@pytest.mark.parametrize("kernel", ["gaussian", "laplacian"])
def test_prediction_is_weighted_sum_of_responses(data, kernel):
    predictor = fit_kernel_ridge(data, KernelRidgeConfig(kernel=kernel, bandwidth=0.3, ridge=1e-2))
    query = np.random.default_rng(0).random((25, 2))
    assert np.allclose(predictor.weights(query) @ data.Y, predictor.predict(query), atol=1e-8)


def test_dual_solves_regularized_system(data):
    predictor = fit_kernel_ridge(data, KernelRidgeConfig(bandwidth=0.2, ridge=1e-3))
    gram = kernel_matrix("gaussian", 0.2, data.X, data.X)
    residual = (gram + data.n * 1e-3 * np.eye(data.n)) @ predictor.dual - data.Y
    assert np.max(np.abs(residual)) <= 1e-8


def test_ridge_must_be_positive(data):
    with pytest.raises(ParameterError):
        fit_kernel_ridge(data, KernelRidgeConfig(), ridge=0.0)


def test_predict_outside_domain(data):
    predictor = fit_kernel_ridge(data, KernelRidgeConfig())
    with pytest.raises(DomainError):
        predictor.predict([[1.5, 0.5]])
    assert np.ndim(predictor.predict([0.5, 0.5])) == 0
