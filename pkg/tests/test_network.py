import numpy as np
import pytest

from models.activation import LEAKY_RELU, RELU, Activation
from models.errors import (
    ActivationMismatchError,
    InputShapeError,
    ParameterError,
    UnsupportedConstructionError,
    WidthMismatchError,
)
from models.network import (
    Network,
    abs_net,
    affine_map,
    affine_net,
    affine_output,
    compose,
    constant_net,
    dumps,
    identity_net,
    loads,
    pad_depth,
    parallel,
    select_net,
)
from services.constructor import teeth_net

GRID = np.linspace(-2.0, 2.0, 101).reshape(-1, 1)


def test_single_point_and_batch_shapes():
    net = affine_net([[1.0, 2.0], [0.0, -1.0]], [0.5, 0.0], RELU)
    assert net([1.0, 1.0]).shape == (2,)
    assert net(np.ones((5, 2))).shape == (5, 2)
    assert np.allclose(net([1.0, 1.0]), [3.5, -1.0])


def test_wrong_input_width():
    net = affine_net([[1.0, 2.0]], [0.0], RELU)
    with pytest.raises(InputShapeError):
        net(np.ones((3, 3)))


def test_metrics_count_nonzeros():
    net = affine_net([[1.0, 0.0], [0.0, 2.0]], [0.0, 3.0], RELU)
    m = net.metrics()
    assert (m.depth, m.sparsity, m.magnitude) == (1, 3, 3.0)


def test_layer_widths_must_chain():
    with pytest.raises(WidthMismatchError):
        Network([(np.ones((2, 1)), np.zeros(2)), (np.ones((1, 3)), np.zeros(1))], RELU)


def test_compose_depth_and_width_check():
    tooth = teeth_net(RELU)
    twice = compose(tooth, tooth)
    assert twice.depth == tooth.depth * 2 - 1
    with pytest.raises(WidthMismatchError):
        compose(tooth, affine_net(np.eye(2), np.zeros(2), RELU))


def test_parallel_pads_depth_with_glue():
    tooth = teeth_net(RELU)
    both = parallel([identity_net(1, 1, RELU), tooth])
    assert both.depth == 2
    assert both.glue_layers == 1
    x = np.linspace(0.0, 1.0, 11).reshape(-1, 1)
    out = both(x)
    assert np.allclose(out[:, 0], x[:, 0])
    assert np.allclose(out[:, 1], tooth(x)[:, 0])


def test_parallel_rejects_mixed_activations():
    with pytest.raises(ActivationMismatchError):
        parallel([affine_net([[1.0]], [0.0], RELU), affine_net([[1.0]], [0.0], LEAKY_RELU)])


@pytest.mark.parametrize("act", [RELU, LEAKY_RELU, Activation("affine-piecewise", 2.0, 0.5)])
@pytest.mark.parametrize("depth", [1, 2, 4])
def test_identity_is_exact(act, depth):
    net = identity_net(1, depth, act)
    assert net.depth == depth
    assert np.allclose(net(GRID), GRID, atol=1e-12)


def test_identity_needs_piecewise_activation():
    with pytest.raises(UnsupportedConstructionError):
        identity_net(1, 2, Activation("sigmoid"))


@pytest.mark.parametrize("act", [RELU, LEAKY_RELU])
def test_abs_net(act):
    assert np.allclose(abs_net(1, act)(GRID), np.abs(GRID), atol=1e-12)


def test_pad_depth_keeps_values():
    net = affine_net([[2.0]], [1.0], LEAKY_RELU)
    padded = pad_depth(net, 3)
    assert padded.depth == 3
    assert np.allclose(padded(GRID), 2.0 * GRID + 1.0)


def test_affine_combinators():
    net = parallel([select_net([0], 2, RELU), select_net([1], 2, RELU)])
    mapped = affine_map(net, [[1.0, 1.0], [1.0, -1.0]], [0.0, 1.0])
    summed = affine_output(net, [2.0, 3.0], 1.0)
    x = np.array([[0.5, 0.25], [-1.0, 2.0]])
    assert np.allclose(mapped(x), np.column_stack([x.sum(axis=1), x[:, 0] - x[:, 1] + 1.0]))
    assert np.allclose(summed(x)[:, 0], 2.0 * x[:, 0] + 3.0 * x[:, 1] + 1.0)


def test_select_out_of_range():
    with pytest.raises(ParameterError):
        select_net([2], 2, RELU)


def test_clip_bounds_output():
    net = affine_net([[10.0]], [0.0], RELU).with_clip(0.5)
    assert np.all(np.abs(net(GRID)) <= 0.5)
    with pytest.raises(ParameterError):
        net.with_clip(-1.0)


def test_constant_net():
    net = constant_net(3.0, 2, RELU)
    assert np.allclose(net(np.random.default_rng(0).random((4, 2))), 3.0)


def test_json_round_trip_evaluates_identically():
    net = compose(teeth_net(LEAKY_RELU), teeth_net(LEAKY_RELU)).with_clip(2.0).with_notes(source="test")
    restored = loads(dumps(net))
    x = np.linspace(0.0, 1.0, 257).reshape(-1, 1)
    assert np.array_equal(restored(x), net(x))
    assert restored.activation == net.activation
    assert restored.metrics() == net.metrics()
    assert restored.notes["source"] == "test"
