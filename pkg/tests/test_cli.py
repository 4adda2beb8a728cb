import json
import math

import pytest
import yaml

from lff3d.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_SINGULAR, main
from lff3d.config import load_preset


def test_simulate_writes_outputs(tmp_path, capsys):
    assert main(["simulate", "--preset", "hold", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("config.yaml", "log.csv", "summary.json"):
        assert (tmp_path / name).is_file()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["ticks"] == 500
    assert "f0 cbf" in capsys.readouterr().out


def test_simulate_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--preset", "hold", "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("log.csv", "summary.json", "config.yaml"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("duration: 1.0\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "frustum" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_simulate_singular_exit_code(tmp_path):
    data = load_preset("hold").model_dump(mode="json")
    xi = math.acos(0.2)
    data["leader"]["trajectory"] = {"type": "scripted", "commands": [[0.0, -1.0, 0.0, 0.0, 0.0]]}
    data["leader"]["max_speed"] = 2.0
    data["followers"][0]["initial"] = {"relative": [0.5, 0.0, xi, 0.0]}
    data["followers"][0]["reference"]["stages"][0]["x"] = [0.5, 0.0, xi, 0.0]
    data["cbf"]["u_min"] = [0.0] * 4
    data["cbf"]["u_max"] = [0.0] * 4
    cfg = tmp_path / "singular.yaml"
    cfg.write_text(yaml.safe_dump(data))
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_SINGULAR
    summary = json.loads((out / "summary.json").read_text())
    assert summary["aborted"]["tick"] == 10
    assert summary["ticks"] == 10


def test_plotdata(tmp_path):
    main(["simulate", "--preset", "hold", "--out", str(tmp_path)])
    assert main(["plotdata", "--log", str(tmp_path / "log.csv"), "--out", str(tmp_path / "p")]) == EXIT_OK
    assert len(list((tmp_path / "p").glob("*.svg"))) == 4


def test_plotdata_empty_log(tmp_path):
    empty = tmp_path / "log.csv"
    empty.write_text("")
    assert main(["plotdata", "--log", str(empty), "--out", str(tmp_path / "p")]) == EXIT_FAILED


def test_verify_bad_tol_scale():
    assert main(["verify", "--tol-scale", "-1"]) == EXIT_CONFIG


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
