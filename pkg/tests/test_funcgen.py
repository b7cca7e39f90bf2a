import numpy as np
import pytest

from models.config import TargetSpec
from models.errors import ParameterError
from models.functions import PiecewiseSmoothFn
from services.funcgen import (
    eval_piecewise,
    gen_dataset,
    make_pieces,
    named_target,
    random_target,
    sample_holder,
    smooth_function,
    target_from_spec,
)
from services.quadrature import tensor_grid


def test_sample_holder_respects_radius():
    f = sample_holder(11, 2.0, 0.7, 2)
    values = f(tensor_grid([0.0, 0.0], [1.0, 1.0], 41))
    assert np.max(np.abs(values)) <= 0.7 + 1e-12


def test_sample_holder_is_seeded():
    grid = tensor_grid([0.0, 0.0], [1.0, 1.0], 9)
    assert np.array_equal(sample_holder(5, 2.0, 1.0, 2)(grid), sample_holder(5, 2.0, 1.0, 2)(grid))
    assert not np.array_equal(sample_holder(5, 2.0, 1.0, 2)(grid), sample_holder(6, 2.0, 1.0, 2)(grid))


def test_make_pieces_validates_counts():
    with pytest.raises(ParameterError):
        make_pieces(0, 2.0, 1.0, J=1, M=3, D=2)
    pieces = make_pieces(0, 2.0, 1.0, J=2, M=3, D=2)
    assert pieces.J == 2 and pieces.M == 3
    assert sum(len(group) for group in pieces.groups) == 4


def test_random_target_descriptor_round_trip():
    target = random_target(4, 2.0, 2.0, 1.0, 2, 2, 2)
    restored = PiecewiseSmoothFn.from_descriptor(target.descriptor())
    x = np.random.default_rng(1).random((200, 2))
    assert np.array_equal(restored(x), target(x))


def test_graph_indicator_values():
    f = named_target("graph-indicator")
    assert f([0.25, 0.7]) == 1.0
    assert f([0.25, 0.5]) == 0.0
    assert f([0.75, 0.3]) == 1.0


def test_rectangle_and_quadrant():
    rect = named_target("rectangle-(2/3)^D", D=3)
    assert rect([0.1, 0.5, 0.6]) == 1.0
    assert rect([0.1, 0.9, 0.6]) == 0.0
    quad = named_target("quadrant")
    assert quad.domain == ((-1.0, -1.0), (1.0, 1.0))
    assert quad([0.5, 0.5]) == 1.0
    assert quad([-0.5, 0.5]) == 0.0


def test_disk_target():
    disk = named_target("disk")
    assert disk([0.5, 0.5]) == 1.0
    assert disk([0.05, 0.05]) == 0.0
    assert disk([0.5, 0.85]) == 0.0


def test_unknown_target():
    with pytest.raises(ParameterError):
        named_target("triangle")


def test_gen_dataset_is_reproducible_and_noise_free_at_sigma_zero():
    target = named_target("smooth-sine")
    first = gen_dataset(target, 128, 0.0, seed=3)
    second = gen_dataset(target, 128, 0.0, seed=3)
    assert np.array_equal(first.X, second.X)
    assert np.array_equal(first.Y, target(first.X))
    assert first.target["name"] == "smooth-sine"


def test_gen_dataset_noise_uses_its_own_stream():
    target = named_target("zero")
    data = gen_dataset(target, 4000, 0.5, seed=9)
    assert np.std(data.Y) == pytest.approx(0.5, rel=0.05)
    assert np.all((data.X >= 0.0) & (data.X <= 1.0))


def test_gen_dataset_rejects_bad_arguments():
    target = named_target("zero")
    with pytest.raises(ParameterError):
        gen_dataset(target, 0, 0.1, 0)
    with pytest.raises(ParameterError):
        gen_dataset(target, 10, -0.1, 0)


def test_target_from_spec():
    spec = TargetSpec(name="random", m_pieces=2, j_boundaries=1, dim=2)
    target = target_from_spec(spec, seed=2)
    assert (target.M, target.J, target.dim) == (2, 1, 2)
    assert target_from_spec(TargetSpec(name="constant", value=2.5))([0.3, 0.3]) == 2.5


def test_eval_piecewise_picks_the_active_piece():
    target = random_target(2, 2.0, 2.0, 1.0, 1, 2, 2)
    x = np.random.default_rng(3).random((100, 2))
    values = eval_piecewise(target, x)
    by_piece = np.zeros(100)
    for m, fn in enumerate(target.functions):
        by_piece += target.indicator(m, x) * fn(x)
    assert np.allclose(values, by_piece)


@pytest.mark.parametrize("name", ["smooth-sine", "product"])
def test_coupled_smooth_functions_need_two_dimensions(name):
    with pytest.raises(ParameterError):
        smooth_function(name, D=1)
    assert smooth_function(name, D=3).dim == 3


def test_sine_works_in_one_dimension():
    f = smooth_function("sine", D=1)
    assert f([0.5]) == pytest.approx(1.0)
    assert f([0.0]) == pytest.approx(0.0, abs=1e-12)


def test_haar_atom_is_lower_dyadic_box():
    atom = named_target("haar-atom")
    assert atom.M == 2 and atom.J == 2
    assert atom([0.2, 0.4]) == 1.0
    assert atom([0.6, 0.4]) == 0.0
    assert atom([0.2, 0.8]) == 0.0
