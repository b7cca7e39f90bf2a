import numpy as np
import pytest

from models.config import CurveletConfig, FitConfig, KernelRidgeConfig, WaveletConfig
from models.errors import ConfigurationError, ParameterError
from services import estimators
from services.funcgen import gen_dataset, named_target


def test_kernel_ridge_grid_is_a_product():
    fit = FitConfig(kernel_ridge=KernelRidgeConfig(bandwidth_grid=[0.1, 0.3], ridge_grid=[1e-3, 1e-2]))
    found = estimators.candidates("kernel-ridge", fit, 128)
    assert len(found) == 4
    assert {c.options["bandwidth"] for c in found} == {0.1, 0.3}


def test_single_setting_means_single_candidate():
    assert len(estimators.candidates("wavelet", FitConfig(), 128)) == 1
    assert estimators.candidates("dnn", FitConfig(), 128)[0].options["width"] == FitConfig().dnn.width


def test_curvelet_candidates_skip_truncations_the_grid_cannot_hold():
    fit = FitConfig(curvelet=CurveletConfig(grid_size=16, tau_grid=[0, 1, 2]))
    assert [c.options["tau"] for c in estimators.candidates("curvelet", fit, 64)] == [0, 1]
    with pytest.raises(ConfigurationError):
        estimators.candidates("curvelet", FitConfig(curvelet=CurveletConfig(grid_size=8, tau_grid=[2])), 64)


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        estimators.candidates("lasso", FitConfig(), 10)
    data = gen_dataset(named_target("zero"), 10, 0.0, seed=0)
    with pytest.raises(ConfigurationError):
        estimators.fit("lasso", data, FitConfig())


def test_fit_dispatch_kinds():
    data = gen_dataset(named_target("graph-indicator"), 64, 0.1, seed=0)
    fit = FitConfig(wavelet=WaveletConfig(tau=1))
    assert estimators.fit("wavelet", data, fit).kind == "wavelet"
    assert estimators.fit("kernel-ridge", data, fit).kind == "kernel-ridge"
    assert np.shape(estimators.predict(estimators.fit("wavelet", data, fit), data.X)) == (64,)


@pytest.fixture(scope="module")
def unit_data():
    data = gen_dataset(named_target("graph-indicator"), 80, 0.1, seed=7)
    other = np.random.default_rng(1).standard_normal(data.n)
    return data, other


def test_kernel_ridge_is_linear_in_responses(unit_data):
    data, other = unit_data
    gap = estimators.superposition_gap("kernel-ridge", data, other, 2.0, -0.5, FitConfig())
    assert gap <= 1e-8


def test_wavelet_is_linear_in_responses(unit_data):
    data, other = unit_data
    gap = estimators.superposition_gap("wavelet", data, other, 2.0, -0.5, FitConfig(wavelet=WaveletConfig(tau=2)))
    assert gap <= 1e-12


def test_curvelet_is_linear_in_responses():
    data = gen_dataset(named_target("quadrant"), 120, 0.1, seed=2)
    other = np.random.default_rng(5).standard_normal(data.n)
    fit = FitConfig(curvelet=CurveletConfig(grid_size=32, tau=1))
    assert estimators.superposition_gap("curvelet", data, other, 1.5, 3.0, fit) <= 1e-12


def test_dnn_is_not_checked_for_linearity(unit_data):
    data, other = unit_data
    with pytest.raises(ParameterError):
        estimators.superposition_gap("dnn", data, other, 1.0, 1.0, FitConfig())
