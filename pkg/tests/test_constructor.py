import numpy as np
import pytest

from models.activation import LEAKY_RELU, RELU, Activation
from models.errors import MissingDerivativeError, ParameterError, UnsupportedConstructionError
from models.functions import HolderFn
from services import constructor
from services.constructor import (
    NetworkBuilder,
    coupling_constant,
    cube_indicator_net,
    monomial_net,
    mult_net,
    piece_indicator_net,
    sawtooth_closed_form,
    sawtooth_net,
    smooth_net,
    square_net,
    step_net,
    teeth_net,
)
from services.funcgen import named_target, random_target, smooth_function
from services.quadrature import qmc_square_error, tensor_grid

PIECEWISE = [RELU, LEAKY_RELU, Activation("affine-piecewise", 2.0, 0.5)]
SMOOTH = [Activation("sigmoid"), Activation("softplus"), Activation("swish")]
UNIT = np.linspace(0.0, 1.0, 4097).reshape(-1, 1)


@pytest.mark.parametrize("act", PIECEWISE)
def test_teeth_is_exact(act):
    net = teeth_net(act)
    assert net.depth == 2
    assert np.max(np.abs(net(UNIT)[:, 0] - sawtooth_closed_form(1, UNIT[:, 0]))) <= 1e-12


@pytest.mark.parametrize("act", PIECEWISE)
@pytest.mark.parametrize("t", [2, 3, 5])
def test_sawtooth_is_exact(act, t):
    net = sawtooth_net(t, act)
    assert net.depth == t + 1
    assert np.max(np.abs(net(UNIT)[:, 0] - sawtooth_closed_form(t, UNIT[:, 0]))) <= 1e-12


@pytest.mark.parametrize("act", [RELU, LEAKY_RELU])
@pytest.mark.parametrize("m", [2, 4, 6, 8])
def test_square_meets_bound(act, m):
    net = square_net(m, act)
    assert net.depth == m + 1
    assert max(layer.out_dim for layer in net.layers[:-1]) == 4
    error = np.max(np.abs(net(UNIT)[:, 0] - UNIT[:, 0] ** 2))
    assert error <= 2.0 ** (-2 - 2 * m) + 1e-12


@pytest.mark.parametrize("act", [RELU, LEAKY_RELU])
@pytest.mark.parametrize("m", [2, 4, 6, 8])
@pytest.mark.parametrize("T", [1.0, 3.0])
def test_mult_within_claimed_bound(act, m, T):
    report = NetworkBuilder(act).build("mult", {"m": m, "T": T})
    assert report.error_kind == "sup"
    assert report.within_bound, (report.measured_error, report.claimed_bound)


def test_mult_is_exact_at_zero_factor():
    net = mult_net(3, 1.0, RELU)
    x = np.column_stack([np.zeros(5), np.linspace(-1.0, 1.0, 5)])
    assert np.allclose(net(x)[:, 0], 0.0, atol=1e-12)


@pytest.mark.parametrize("params", [{"m": 5, "T": 1.0, "dprime": 3}, {"m": 5, "T": 3.0, "dprime": 2}])
def test_multi_mult_within_claimed_bound(params):
    report = NetworkBuilder(RELU).build("multi-mult", params)
    assert report.within_bound


def test_multipliers_need_piecewise_activation():
    with pytest.raises(UnsupportedConstructionError):
        mult_net(3, 1.0, Activation("sigmoid"))
    with pytest.raises(UnsupportedConstructionError):
        square_net(3, Activation("softplus"))


@pytest.mark.parametrize("act", SMOOTH)
def test_multiplier_based_builders_need_piecewise_activation(act):
    quadrant = named_target("quadrant")
    with pytest.raises(UnsupportedConstructionError):
        smooth_net(smooth_function("product"), 2.0, 0.1, (np.zeros(2), np.ones(2)), act, measure=False)
    with pytest.raises(UnsupportedConstructionError):
        cube_indicator_net([0.5, 0.5], 0.25, 0.05, act)
    with pytest.raises(UnsupportedConstructionError):
        piece_indicator_net(quadrant.pieces, 0, 0.05, act, (quadrant.lower, quadrant.upper))


@pytest.mark.parametrize("act", PIECEWISE)
def test_monomial_of_degree_one_is_exact_identity(act):
    grid = np.linspace(-1.0, 1.0, 101).reshape(-1, 1)
    net = monomial_net(1, 0.01, 1.0, act)
    assert np.max(np.abs(net(grid) - grid)) <= 1e-12


def test_monomial_multiplier_path():
    report = NetworkBuilder(RELU).build("monomial", {"gamma": 3, "eps": 0.01, "T": 1.0})
    assert report.within_bound
    assert report.network.notes["path"] == "multiplier"


@pytest.mark.parametrize("act", SMOOTH)
def test_monomial_finite_difference_path(act):
    report = NetworkBuilder(act).build("monomial", {"gamma": 2, "eps": 0.01, "T": 1.0})
    assert report.network.depth == 2
    assert report.within_bound, (act.kind, report.measured_error)


def test_monomial_rejects_bad_arguments():
    with pytest.raises(ParameterError):
        monomial_net(2, 1.5, 1.0, RELU)
    with pytest.raises(UnsupportedConstructionError):
        monomial_net(20, 0.1, 1.0, Activation("sigmoid"))


@pytest.mark.parametrize("act", PIECEWISE + SMOOTH)
@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_step_within_claimed_bound(act, eps):
    report = NetworkBuilder(act).build("step", {"eps": eps, "T": 1.0})
    assert report.network.depth == 2
    assert report.within_bound, (act.kind, eps, report.measured_error)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
def test_relu_ramp_error_matches_closed_form(eps):
    net = step_net(eps, 1.0, RELU)
    measured = constructor.step_l2_error(net, 1.0)
    assert abs(measured - net.notes["exact_l2"]) <= 1e-4
    assert net.notes["exact_l2"] == pytest.approx(eps)


@pytest.mark.parametrize("act", [RELU] + SMOOTH)
def test_step_error_shrinks_as_slope_grows(act):
    nets = sorted((step_net(eps, 1.0, act) for eps in [0.2, 0.1, 0.05, 0.02, 0.01]), key=lambda n: n.notes["a"])
    errors = [constructor.step_l2_error(net, 1.0) for net in nets]
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:])), errors


def test_step_rejects_eps_outside_unit_interval():
    with pytest.raises(ParameterError):
        step_net(1.0, 1.0, RELU)


def test_cube_indicator_within_bound():
    report = NetworkBuilder(RELU, points=2 ** 14).build("cube-indicator", {"D": 2, "side": 0.25, "eps": 0.05})
    assert report.within_bound


def test_cube_indicator_must_fit_in_unit_cube():
    with pytest.raises(ParameterError):
        cube_indicator_net([0.95, 0.5], 0.25, 0.05, RELU)


def test_halfspace_within_bound():
    report = NetworkBuilder(LEAKY_RELU, points=2 ** 14).build("halfspace", {"D": 2, "h": 0.4, "eps": 0.05})
    assert report.within_bound


def test_piece_indicator_on_graph_boundary():
    target = named_target("graph-indicator")
    net = piece_indicator_net(target.pieces, 1, 0.2, RELU)
    assert net.notes["boundaries"] == "smooth"
    report = NetworkBuilder(RELU, points=2 ** 14).build("piece-indicator", {"target": "graph-indicator",
                                                                            "index": 1, "eps": 0.2})
    assert report.within_bound


def test_piece_index_out_of_range():
    target = named_target("rectangle")
    with pytest.raises(ParameterError):
        piece_indicator_net(target.pieces, 5, 0.1, RELU)


def test_quadrant_piece_indicator_error_and_range():
    quadrant = named_target("quadrant")
    region = (quadrant.lower, quadrant.upper)
    net = piece_indicator_net(quadrant.pieces, 0, 0.05, RELU, region)
    error = qmc_square_error(net, lambda x: quadrant.indicator(0, x), quadrant.lower, quadrant.upper, 2 ** 14).l2
    assert error <= 0.05 + constructor.QMC_TOLERANCE
    values = net(tensor_grid(quadrant.lower, quadrant.upper, 201))[:, 0]
    assert np.max(np.abs(values)) <= 1.0 + 0.05


def test_smooth_net_constant_function_is_exact():
    f = smooth_function("constant", 2, 2.0, value=0.75)
    report = smooth_net(f, 2.0, 0.1, (np.zeros(2), np.ones(2)), RELU)
    assert report.measured_error <= 1e-12


def test_smooth_net_within_bound():
    f = smooth_function("smooth-sine", 2, 2.0)
    report = smooth_net(f, 2.0, 0.2, (np.zeros(2), np.ones(2)), RELU, points=2 ** 14)
    assert report.params["ell"] == 3
    assert report.params["k"] == 1
    assert report.within_bound


def test_smooth_net_on_product_within_delta():
    report = smooth_net(smooth_function("product"), 2.0, 0.1, (np.zeros(2), np.ones(2)), RELU, points=2 ** 14)
    assert report.params["k"] == 1
    assert report.measured_error <= 0.1


def test_smooth_net_needs_derivatives():
    disk = HolderFn("named", 1, 2.0, 1.0, {"form": "disk-upper", "center": [0.5, 0.5], "radius": 0.3})
    with pytest.raises(MissingDerivativeError):
        smooth_net(disk, 2.0, 0.1, (np.zeros(1), np.ones(1)), RELU, measure=False)


def test_piecewise_rectangle_within_bound():
    report = NetworkBuilder(RELU, points=2 ** 14).build("piecewise", {"target": "rectangle", "eps1": 0.2,
                                                                      "eps2": 0.2})
    assert report.params["J"] == 2
    assert report.within_bound


def test_coupling_constant():
    assert coupling_constant(1.0) == pytest.approx(1.0 / 3.0)


def test_unknown_builder():
    with pytest.raises(ParameterError):
        NetworkBuilder(RELU).build("convolution")


def test_single_piece_target_reduces_to_smooth_net():
    target = named_target("product")
    report = constructor.piecewise_smooth_net(target, 0.1, 0.1, RELU, points=2 ** 14)
    assert report.params["M"] == 1 and report.params["J"] == 0
    direct = smooth_net(target.functions[0], target.beta, 0.1, (target.lower, target.upper), RELU, measure=False)
    assert report.params["ell"] == direct.params["ell"]
    assert report.measured_error <= 0.1 + constructor.QMC_TOLERANCE


def test_disk_boundaries_need_low_boundary_smoothness():
    with pytest.raises(MissingDerivativeError):
        NetworkBuilder(RELU, points=2 ** 12).build("piecewise", {"target": "disk"})


@pytest.mark.slow
def test_disk_piece_indicator_with_zero_degree_boundaries():
    disk = named_target("disk", alpha=1.0)
    net = piece_indicator_net(disk.pieces, 0, 0.2, RELU)
    assert net.notes["boundaries"] == "smooth,smooth"


@pytest.mark.slow
def test_piecewise_random_target_within_bound():
    target = random_target(3, 2.0, 2.0, 1.0, 1, 2, 2)
    report = constructor.piecewise_smooth_net(target, 0.25, 0.25, RELU)
    assert report.within_bound


@pytest.mark.slow
def test_piecewise_graph_indicator_within_bound():
    report = constructor.piecewise_smooth_net(named_target("graph-indicator"), 0.05, 0.05, RELU)
    assert report.measured_error <= 0.1 + constructor.QMC_TOLERANCE
