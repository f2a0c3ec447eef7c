import json
import os

import pytest

from ffg import __version__
from ffg.cli import EXIT_CONFIG, EXIT_NUMERICAL, build_parser, main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for key in list(os.environ):
        if key.startswith("FFG_"):
            monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_sweet_spot(capsys):
    assert main(["sweet-spot"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["alpha"] == pytest.approx(1.538, abs=1e-3)
    assert abs(result["residual"]) <= 1e-9


def test_sweet_spot_without_root_is_a_numerical_failure(capsys):
    assert main(["sweet-spot", "--lo", "1.0", "--hi", "1.2"]) == EXIT_NUMERICAL
    assert "no sign change" in capsys.readouterr().err


def test_validate_prints_resolved_config(tmp_path, capsys):
    path = _write(tmp_path, "scan.json", {"experiment": "t0_scan"})
    assert main(["validate", path, "--n-fock", "30", "--m-max", "5"]) == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["params"]["n_fock"] == 30
    assert resolved["numerics"]["m_max"] == 5
    assert resolved["sweep"]["variable"] == "t0"
    assert resolved["sweep"]["points"] == 16


def test_invalid_config_exits_with_config_code(tmp_path, capsys):
    path = _write(tmp_path, "bad.json", {"experiment": "spectrum", "options": {"levels": 2}})
    assert main(["validate", path]) == EXIT_CONFIG
    assert "options" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "nope.json"), "validate", path]) == EXIT_CONFIG


def test_bad_override_exits_with_config_code(tmp_path):
    path = _write(tmp_path, "spectrum.json", {"experiment": "spectrum"})
    assert main(["validate", path, "--n-fock", "1"]) == EXIT_CONFIG


def test_run_writes_outputs(tmp_path, capsys):
    path = _write(
        tmp_path,
        "spectrum.json",
        {"experiment": "spectrum", "params": {"n_fock": 30}, "output": "spec"},
    )
    out = tmp_path / "results"
    assert main(["run", path, "--out", str(out), "--threads", "1"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["pairing_error"] <= 1e-10
    assert (out / "spec.csv").read_text().startswith("index,energy\n")
    meta = json.loads((out / "spec.meta.json").read_text())
    assert meta["config"]["params"]["n_fock"] == 30


def test_run_uses_harness_defaults_from_config(tmp_path):
    path = _write(tmp_path, "spot.json", {"experiment": "sweet_spot"})
    settings = _write(tmp_path, "ffg.json", {"harness": {"out": str(tmp_path / "from_config")}})
    assert main(["--config", settings, "run", path]) == 0
    assert (tmp_path / "from_config" / "sweet_spot.csv").exists()
