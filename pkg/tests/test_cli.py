import csv
import json

import pytest
import yaml

from blochdegen.cli import main
from blochdegen.config import RunConfig, load_config, stream_seeds
from blochdegen.errors import ConfigError
from blochdegen.report import BANDS_HEADER, SCAN_HEADER, render_csv, render_json, to_jsonable

SMALL = {
    "gmax": 10.0,
    "constants": {"so_scale": 1.0e4},
    "verify": {"n_states": 5, "gmax": 10.0},
    "bands": {"samples_per_segment": 2, "n_bands": 4},
    "null_result": {"n_seeds": 2},
    "external": {"supercell": [4, 1, 1]},
}


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def test_default_config_loads():
    cfg = load_config("configs/default.yaml")
    # the shipped config only turns up the spin-orbit scale
    assert cfg == RunConfig(constants={"so_scale": 1.0e4})
    assert RunConfig().constants.so_scale == 1.0


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, {"gmaks": 10.0}))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_stream_seeds_are_stable():
    assert stream_seeds(1, 3) == stream_seeds(1, 3)
    assert len(set(stream_seeds(1, 20))) == 20


def test_json_is_deterministic_and_strict():
    payload = {"b": 1.0, "a": [1 + 2j, float("nan")], "c": (True, 3)}
    text = render_json(payload)
    assert text == render_json(dict(reversed(list(payload.items()))))
    assert json.loads(text) == {"a": [[1.0, 2.0], None], "b": 1.0, "c": [True, 3]}
    assert to_jsonable({1: 2}) == {"1": 2}


def test_csv_floats_round_trip():
    x = 0.1 + 0.2
    text = render_csv(SCAN_HEADER, [(x, 1e-300, 0.0, 2)])
    rows = list(csv.reader(text.splitlines()))
    assert rows[0] == list(SCAN_HEADER)
    assert float(rows[1][0]) == x and float(rows[1][1]) == 1e-300


def test_verify_exit_zero(tmp_path, capsys):
    assert main(["verify", "--config", str(_write(tmp_path, SMALL)), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["passed"] and report["command"] == "verify"
    assert "checks passed" in capsys.readouterr().out


def test_bands_csv_header(tmp_path):
    assert main(["bands", "--config", str(_write(tmp_path, SMALL)), "--out", str(tmp_path)]) == 0
    rows = list(csv.reader((tmp_path / "bands.csv").read_text().splitlines()))
    assert tuple(rows[0]) == BANDS_HEADER
    assert len(rows) == 1 + 9 * 4


def test_parity_violation_exit_two(tmp_path, capsys):
    data = dict(SMALL, v0={"parity": "even", "amplitudes": [
        {"g": [1, 0, 0], "im": 0.1}, {"g": [-1, 0, 0], "im": -0.1}]})
    assert main(["verify", "--config", str(_write(tmp_path, data)), "--out", str(tmp_path)]) == 2
    assert "ParityViolation" in capsys.readouterr().err


def test_config_error_exit_two(tmp_path, capsys):
    assert main(["verify", "--config", str(_write(tmp_path, {"gmaks": 1})), "--out", str(tmp_path)]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_zero_perturbation_is_fourfold(tmp_path):
    data = dict(SMALL, phi={"parity": "odd", "amplitudes": []},
                constants={"so_scale": 0.0})
    assert main(["perturb", "--config", str(_write(tmp_path, data)), "--out", str(tmp_path)]) == 0
    outcome = json.loads((tmp_path / "report.json").read_text())["results"]["outcome"]
    assert outcome["splitting"] == 0.0 and outcome["fourfold"]


def test_tolerance_failure_exit_one(tmp_path, capsys):
    data = dict(SMALL, external={"supercell": [4, 1, 1], "tolerance": 1e-9})
    assert main(["external", "--config", str(_write(tmp_path, data)), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "FAIL pinacoidal_pt_vs_oracle" in err


def test_oracle_scan_csv_and_seed_override(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["oracle", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "5"]) == 0
    rows = list(csv.reader((tmp_path / "a" / "scan.csv").read_text().splitlines()))
    assert tuple(rows[0]) == SCAN_HEADER
    assert float(rows[1][0]) == 0.0
    assert json.loads((tmp_path / "a" / "report.json").read_text())["seed"] == 5


def test_plot_outputs(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["bands", "--config", str(cfg), "--out", str(tmp_path), "--plot"]) == 0
    first = (tmp_path / "bands.png").read_bytes()
    assert first.startswith(b"\x89PNG")
    assert main(["bands", "--config", str(cfg), "--out", str(tmp_path), "--plot"]) == 0
    assert (tmp_path / "bands.png").read_bytes() == first


def test_bad_seed_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["verify", "--config", str(_write(tmp_path, SMALL)), "--seed", str(2**64)])
