from pathlib import Path

import pytest
import yaml

from lipschitz_hawking import config as cfgmod
from lipschitz_hawking.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return p


def test_shipped_configs_validate():
    for p in sorted(CONFIGS.glob("*.yaml")):
        diags = cfgmod.validate(cfgmod.load_raw(p))
        assert bool(diags) == (p.stem == "bad_resolution"), (p.name, diags)


def test_beta_rho_diagnostic():
    raw = {"experiment": "hawking", "comparison": {"rho": -1.0, "beta": -2.0}}
    msgs = [str(d) for d in cfgmod.validate(raw)]
    assert any("needs |beta| > 3" in m for m in msgs)


def test_resolvability_diagnostic():
    raw = {"experiment": "hawking", "grid": {"bounds": [[-1.0, 1.0]], "points": [201]},
           "mollifier": {"schedule": [0.1, 0.02]}}
    msgs = [str(d) for d in cfgmod.validate(raw)]
    assert any("not resolvable" in m for m in msgs)


def test_misc_diagnostics():
    raw = {"experiment": "nope", "seed": -1, "bogus": 1, "mollifier": {"schedule": [0.1, 0.2]}}
    keys = {d.key for d in cfgmod.validate(raw)}
    assert {"experiment", "seed", "bogus", "mollifier.schedule"} <= keys


def test_model_params_not_inherited():
    rc = cfgmod.build({"experiment": "segment", "model": {"name": "minkowski", "params": {"n": 3}}})
    assert rc.model["params"] == {"n": 3}


def test_bad_resolution_exit_code(capsys):
    assert main(["run", str(CONFIGS / "bad_resolution.yaml")]) == 2
    assert "resolution" in capsys.readouterr().err
    assert main(["validate", str(CONFIGS / "bad_resolution.yaml")]) == 2


def test_missing_config_and_bad_args(tmp_path):
    assert main(["run", str(tmp_path / "absent.yaml")]) == 2
    assert main(["frobnicate"]) == 2


def test_validate_ok(capsys):
    assert main(["validate", str(CONFIGS / "hawking_sharp.yaml")]) == 0
    assert capsys.readouterr().out.strip() == "ok"


def test_version_and_catalog(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip().startswith("lipschitz-hawking ")
    assert main(["catalog", "list"]) == 0
    out = capsys.readouterr().out
    assert "grw_two_slope" in out and "minkowski" in out


def test_run_is_deterministic_and_reports(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"experiment": "constants", "output": str(tmp_path / "unused"),
                            "options": {"rhos": [-1.0, 0.0, 1.0], "dims": [4]}})
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        monkeypatch.setenv(cfgmod.OUTPUT_ENV, str(d))
        assert main(["run", str(cfg)]) == 0
        outs.append(d)
    files = sorted(p.name for p in outs[0].iterdir())
    assert "report.yaml" in files and any(f.endswith(".csv") for f in files)
    for name in files:
        if name != "report.yaml":
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    rep = yaml.safe_load((outs[0] / "report.yaml").read_text())
    assert rep["verdict"] == "PASS" and rep["experiment"] == "constants"
    assert rep["config"]["options"]["dims"] == [4] and rep["version"]
    assert not (tmp_path / "unused").exists()


def test_summarize(tmp_path, capsys):
    for name, verdict in (("a", "PASS"), ("b", "FAIL")):
        (tmp_path / name).mkdir()
        (tmp_path / name / "report.yaml").write_text(yaml.safe_dump({"verdict": verdict, "experiment": name}))
    assert main(["report", "summarize", str(tmp_path)]) == 1
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" in out
    assert main(["report", "summarize", str(tmp_path / "a")]) == 0
    assert main(["report", "summarize", str(tmp_path / "none")]) == 2
