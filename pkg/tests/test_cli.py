import json
import os

import pytest
from absl import flags
from absl.testing import flagsaver

from swsysid import cli

FLAGS = flags.FLAGS


@pytest.fixture(autouse=True)
def parsed_flags():
    if not FLAGS.is_parsed():
        FLAGS(["swsysid"])
    with flagsaver.flagsaver():
        yield


def write_config(tmp_path, a=0.5, horizon=256, runs=2):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps(
            {
                "name": "cli",
                "system": {"modes": [[[a]]], "switch_pmf": [1.0]},
                "noise": {"kind": "gaussian_iid", "covariance": [[1.0]]},
                "horizon": horizon,
                "runs": runs,
                "master_seed": 0,
                "output_dir": str(tmp_path / "from_config"),
            }
        )
    )
    return str(path)


def test_unknown_command():
    assert cli.main(["swsysid"]) == cli.EXIT_INVALID
    assert cli.main(["swsysid", "train"]) == cli.EXIT_INVALID


def test_selftest_passes(capsys):
    assert cli.main(["swsysid", "selftest"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "PASS  scalar least squares" in out


def test_stability(capsys):
    FLAGS.config = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "example2.json")
    assert cli.main(["swsysid", "stability"]) == cli.EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["quadrant"] == "mss-only"


def test_missing_config_is_a_validation_error():
    assert cli.main(["swsysid", "stability"]) == cli.EXIT_INVALID


def test_invalid_config_is_a_validation_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"system": {"modes": [[[0.5]]], "switch_pmf": [0.5]}, "horizon": 10}))
    FLAGS.config = str(path)
    assert cli.main(["swsysid", "stability"]) == cli.EXIT_INVALID


def test_non_numeric_config_is_a_validation_error(tmp_path):
    path = tmp_path / "bad.json"
    config = {"system": {"modes": [[["abc"]]], "switch_pmf": [1.0]}, "horizon": 10, "runs": "x"}
    path.write_text(json.dumps(config))
    FLAGS.config = str(path)
    assert cli.main(["swsysid", "stability"]) == cli.EXIT_INVALID


def test_simulate_then_fit(tmp_path, capsys):
    FLAGS.config = write_config(tmp_path)
    FLAGS.out = str(tmp_path / "sim")
    FLAGS.horizon = 400
    assert cli.main(["swsysid", "simulate"]) == cli.EXIT_OK
    info = json.loads(capsys.readouterr().out)
    assert info["horizon"] == 400
    FLAGS.trajectory = info["trajectory"]
    FLAGS.modes = 1
    FLAGS.out = str(tmp_path / "fit")
    assert cli.main(["swsysid", "fit"]) == cli.EXIT_OK
    with open(tmp_path / "fit" / "estimate.json") as f:
        estimate = json.load(f)
    assert estimate["t"] == 400
    assert abs(estimate["modes"][0]["a_hat"][0][0] - 0.5) < 0.2


def test_montecarlo_uses_env_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SWSYSID_OUT", str(tmp_path / "env"))
    FLAGS.config = write_config(tmp_path)
    FLAGS.progress = False
    FLAGS.workers = 2
    assert cli.main(["swsysid", "montecarlo"]) == cli.EXIT_OK
    listing = json.loads(capsys.readouterr().out)
    assert listing["dir"] == str(tmp_path / "env")
    assert os.path.exists(tmp_path / "env" / "summary.json")


def test_montecarlo_defaults_to_config_output_dir(tmp_path, monkeypatch):
    monkeypatch.delenv("SWSYSID_OUT", raising=False)
    FLAGS.config = write_config(tmp_path)
    FLAGS.progress = False
    FLAGS.runs = 1
    assert cli.main(["swsysid", "montecarlo"]) == cli.EXIT_OK
    assert os.path.exists(tmp_path / "from_config" / "curves.csv")


def test_divergence_exit_code(tmp_path):
    FLAGS.config = write_config(tmp_path, a=10.0, horizon=400, runs=3)
    FLAGS.out = str(tmp_path / "out")
    FLAGS.progress = False
    assert cli.main(["swsysid", "montecarlo"]) == cli.EXIT_UNSTABLE


def test_io_failure_exit_code(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    FLAGS.config = write_config(tmp_path)
    FLAGS.out = str(blocker / "out")
    FLAGS.progress = False
    assert cli.main(["swsysid", "montecarlo"]) == cli.EXIT_IO
