import pytest

from models.config import RunConfig, resolve_config
from models.errors import ConfigurationError


@pytest.fixture
def run_file(tmp_path):
    def write(text):
        path = tmp_path / "run.env"
        path.write_text(text, encoding="utf-8")
        return str(path)
    return write


def test_defaults():
    config = resolve_config("regress", environ={})
    assert config.seed == 0
    assert config.output_dir == "results"
    assert config.estimators == ["wavelet"]
    assert config.fit.curvelet.grid_size == 256


def test_precedence_flags_over_file_over_environment(run_file):
    environ = {"SINGLAB_SEED": "3", "SINGLAB_WORKERS": "2"}
    path = run_file("SEED=5\nREPS=4\n")
    assert resolve_config("rate-sweep", {}, path, environ).seed == 5
    config = resolve_config("rate-sweep", {"seed": 9}, path, environ)
    assert config.seed == 9
    assert config.reps == 4
    assert config.workers == 2
    assert resolve_config("rate-sweep", environ=environ).seed == 3


def test_unknown_key_is_rejected(run_file):
    with pytest.raises(ConfigurationError):
        resolve_config("regress", {}, run_file("colour=blue\n"), {})
    with pytest.raises(ConfigurationError):
        resolve_config("regress", {"colour": "blue"}, environ={})


def test_missing_run_file(tmp_path):
    with pytest.raises(ConfigurationError):
        resolve_config("regress", {}, str(tmp_path / "absent.env"), {})


def test_validation_errors_become_configuration_errors():
    with pytest.raises(ConfigurationError):
        resolve_config("rate-sweep", {"reps": 0}, environ={})
    with pytest.raises(ConfigurationError):
        resolve_config("rate-sweep", {"n_grid": "256,128,512"}, environ={})
    with pytest.raises(ConfigurationError):
        resolve_config("approx-sweep", {"eps_grid": "0.1,0.2"}, environ={})
    with pytest.raises(ConfigurationError):
        resolve_config("regress", {"estimators": "lasso"}, environ={})


def test_rate_sweep_needs_three_sizes():
    with pytest.raises(ConfigurationError):
        resolve_config("rate-sweep", {"n_grid": "64,128"}, environ={})
    assert resolve_config("regress", {"n_grid": "64,128"}, environ={}).n_grid == [64, 128]


def test_comma_lists_and_shared_keys(run_file):
    path = run_file("estimators=wavelet, dnn\ntau_grid=1,2\nactivation=softplus\n")
    config = resolve_config("rate-sweep", {}, path, {})
    assert config.estimators == ["wavelet", "dnn"]
    assert config.fit.wavelet.tau_grid == [1, 2]
    assert config.fit.curvelet.tau_grid == [1, 2]
    assert config.activation == "softplus"
    assert config.fit.dnn.activation == "softplus"


def test_builder_keys_collect_into_params():
    config = resolve_config("construct", {"builder": "mult", "m": 3, "T": 2.0}, environ={})
    assert config.builder_params == {"m": 3, "T": 2.0}


def test_config_is_frozen():
    config = resolve_config("regress", environ={})
    assert isinstance(config, RunConfig)
    with pytest.raises(Exception):
        config.seed = 4


def test_gap_target_reaches_dnn_config(run_file):
    config = resolve_config("regress", {}, run_file("gap_target=0.001\n"), {})
    assert config.fit.dnn.gap_target == pytest.approx(1e-3)
    assert resolve_config("regress", environ={}).fit.dnn.gap_target is None
    with pytest.raises(ConfigurationError):
        resolve_config("regress", {"gap_target": 0.0}, environ={})
