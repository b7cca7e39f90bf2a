import os

import pytest

import main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for key in ("SINGLAB_SEED", "SINGLAB_OUTPUT_DIR", "SINGLAB_WORKERS"):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)


def run(*argv):
    return main.main(list(argv))


def test_construct_writes_report_and_manifest(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert run("construct", "--builder", "mult", "--m", "4", "--T", "1", "--output-dir", out, "--save") == 0
    for name in ("construct.csv", "manifest_construct.json", "network.json"):
        assert os.path.isfile(os.path.join(out, name))
    assert "within_bound" in capsys.readouterr().out


def test_unknown_builder_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        run("construct", "--builder", "spline")
    assert info.value.code == 2


def test_version():
    with pytest.raises(SystemExit) as info:
        run("--version")
    assert info.value.code == 0


def test_strict_bound_violation_exits_one(tmp_path):
    out = str(tmp_path / "out")
    assert run("construct", "--builder", "square", "--m", "2", "--bound", "1e-6", "--strict",
               "--output-dir", out) == 1


def test_invalid_configuration_exits_two(tmp_path):
    assert run("rate-sweep", "--reps", "0", "--output-dir", str(tmp_path / "out")) == 2


def test_report_without_tables_exits_two(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run("report", "--output-dir", str(empty)) == 2


def test_regress_wavelet(tmp_path):
    out = str(tmp_path / "out")
    assert run("regress", "--estimator", "wavelet", "--n", "64", "--tau", "1", "--points", "1024",
               "--output-dir", out, "--save") == 0
    assert os.path.isfile(os.path.join(out, "regress.csv"))
    assert os.path.isfile(os.path.join(out, "predictor", "predictor.json"))
    assert os.path.isfile(os.path.join(out, "dataset.csv"))


def test_rate_sweep_then_report(tmp_path):
    out = str(tmp_path / "out")
    assert run("rate-sweep", "--estimators", "wavelet", "--n-grid", "64,128,256", "--reps", "2", "--tau", "1",
               "--points", "1024", "--workers", "1", "--no-plot", "--output-dir", out) == 0
    assert os.path.isfile(os.path.join(out, "rate_wavelet_graph-indicator.csv"))
    assert run("report", "--output-dir", out) == 0
    assert os.path.isfile(os.path.join(out, "report.csv"))


def test_approx_sweep_of_constant(tmp_path):
    out = str(tmp_path / "out")
    assert run("approx-sweep", "--sweep", "smooth", "--function", "constant", "--eps-grid", "0.2,0.1",
               "--points", "1024", "--no-plot", "--output-dir", out) == 0
    assert os.path.isfile(os.path.join(out, "approx_smooth.csv"))
    assert not os.path.isfile(os.path.join(out, "approx_smooth.svg"))
