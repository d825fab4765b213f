from pathlib import Path

import numpy as np
import pytest

import cli
from data_loader import read_csv
from errors import NearResonanceError
from verify import ScalarCheck

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def write_config(tmp_path):
    def write(text):
        path = tmp_path / "experiment.conf"
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


def test_spectrum_of_the_sphere(tmp_path, write_config, capsys):
    config = write_config("n=3\nlink.kind=sphere\nlink.dim=2\nlink.jmax=5\n")
    assert cli.main(["spectrum", "--config", config, "--out", str(tmp_path / "out")]) == cli.EXIT_OK
    frame = read_csv(tmp_path / "out" / "spectrum.csv")
    np.testing.assert_allclose(frame["mu2"], [0, 2, 6, 12, 20])
    np.testing.assert_allclose(frame["multiplicity"], [1, 3, 5, 7, 9])
    np.testing.assert_allclose(frame["nu"], [0.5, 1.5, 2.5, 3.5, 4.5])
    assert (tmp_path / "out" / "spectrum.csv").read_text(encoding="utf-8").startswith("# config-hash: ")
    assert "volume 1.25663706143591" in capsys.readouterr().out


def test_custom_link_config(tmp_path, monkeypatch):
    monkeypatch.chdir(ROOT)
    args = ["spectrum", "--config", "configs/custom_link.conf", "--out", str(tmp_path)]
    assert cli.main(args) == cli.EXIT_OK
    assert list(read_csv(tmp_path / "spectrum.csv")["multiplicity"]) == [1, 3, 5, 7, 9]


def test_output_directory_from_environment(tmp_path, write_config, monkeypatch):
    monkeypatch.setenv("CONE_OUT", str(tmp_path / "from_env"))
    assert cli.main(["spectrum", "--config", write_config("link.jmax=2\n")]) == cli.EXIT_OK
    assert (tmp_path / "from_env" / "spectrum.csv").is_file()


def test_verify_writes_reports(tmp_path, write_config, capsys):
    config = write_config("verify.checks=weyl\n")
    assert cli.main(["verify", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    assert capsys.readouterr().out.startswith("PASS weyl ")
    assert (tmp_path / "verify" / "weyl.csv").is_file()


def test_verify_failure_exit_code(tmp_path, monkeypatch, capsys):
    broken = {"name": "broken", "description": "always fails", "run": lambda config, seed: [ScalarCheck("broken", 1.0, 1e-3)]}
    monkeypatch.setattr(cli, "select_members", lambda checks: [broken])
    assert cli.main(["verify", "--out", str(tmp_path)]) == cli.EXIT_FAIL
    assert capsys.readouterr().out.startswith("FAIL broken ")


@pytest.mark.parametrize(
    "text, extra",
    [
        ("grid.nodes=64\n", []),
        ("verify.checks=nonsense\n", []),
        ("link.kind=circle\n", []),
        ("n=3\n", ["--jobs", "0"]),
        ("n=3\n", ["--seed", "-1"]),
    ],
)
def test_configuration_errors(tmp_path, write_config, text, extra):
    args = ["verify", "--config", write_config(text), "--out", str(tmp_path), *extra]
    assert cli.main(args) == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["spectrum", "--config", str(tmp_path / "absent.conf")]) == cli.EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def resonant(ctx):
        raise NearResonanceError(1.0, 1e-9, 1e-6)

    monkeypatch.setitem(cli.COMMANDS, "resolvent", resonant)
    assert cli.main(["resolvent", "--out", str(tmp_path)]) == cli.EXIT_NUMERICAL


def test_resolvent_command(tmp_path, write_config, capsys):
    config = write_config(
        "grid.rmax=10\ngrid.n=64\npotential.family=gaussian\npotential.a=0.5\n"
        "resolvent.lambda=1.5\nscan.lambda_min=0.5\nscan.lambda_max=5\nscan.count=4\n"
    )
    assert cli.main(["resolvent", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "birman_schwinger M=1" in out
    assert "negative_eigenvalues 0" in out
    assert len(read_csv(tmp_path / "kernel_free.csv")) == 64 * 64
    assert list(read_csv(tmp_path / "fredholm.csv").columns) == ["lambda", "smin", "flag"]
    assert (tmp_path / "kernel_perturbed.csv").is_file()


def test_free_resolvent_skips_the_perturbed_kernel(tmp_path, write_config, capsys):
    config = write_config("grid.rmax=10\ngrid.n=64\n")
    assert cli.main(["resolvent", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    assert "potential is zero" in capsys.readouterr().out
    assert not (tmp_path / "kernel_perturbed.csv").exists()


def test_propagate_one_mode(tmp_path, write_config, capsys):
    config = write_config("grid.rmax=12\ngrid.n=512\ntime.t=0.25\n")
    assert cli.main(["propagate", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    lines = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(lines["weber_defect"]) < 1e-6
    assert float(lines["unitarity_defect"]) < 1e-7
    assert list(read_csv(tmp_path / "propagate_mode.csv").columns) == ["r", "re", "im"]


def test_propagate_full_cone(tmp_path, write_config, capsys):
    config = write_config("grid.rmax=12\ngrid.n=256\nlink.jmax=2\npropagate.kind=cone\npropagate.theta_count=4\n")
    assert cli.main(["propagate", "--config", config, "--out", str(tmp_path)]) == cli.EXIT_OK
    assert float(capsys.readouterr().out.split()[-1]) < 1e-12
    assert list(read_csv(tmp_path / "propagate_cone.csv").columns) == ["r", "theta", "re", "im"]


@pytest.mark.slow
def test_selftest(tmp_path, capsys):
    assert cli.main(["selftest", "--out", str(tmp_path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    for name in ("bessel_oracle", "wronskian", "half_integer", "grid_weights"):
        assert f"PASS {name} " in out
    assert list(read_csv(tmp_path / "selftest.csv")["name"].unique()) == ["bessel_oracle", "wronskian", "half_integer", "grid_weights"]
