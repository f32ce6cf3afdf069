import json

import numpy as np
import pytest

from capflow import harness, studies
from capflow.cli import main
from capflow.harness import ConfigError, parse_config, validate

SMALL = "grid.Nx=16\ngrid.Ny=12\ngrid.dt=0.05\n"


def write_cfg(tmp_path, body, name="run.cfg"):
    p = tmp_path / name
    p.write_text(body + f"output.dir={tmp_path / 'out'}\n")
    return p


def test_parse_types_and_comments():
    raw = parse_config("# header\ngrid.Nx = 32  # trailing\nstudy.s_values=0.1, 0.01\nstudy.name=smoke\n")
    assert raw == {"grid.Nx": 32, "study.s_values": [0.1, 0.01], "study.name": "smoke"}


@pytest.mark.parametrize("text, field", [
    ("grid.Nx=16\n", "study.name"),
    ("study.name=smoke\n", "grid.Nx"),
    ("study.name=smoke\ngrid.Nx=sixteen\n", "grid.Nx"),
    ("study.name=smoke\ngrid.Nx=16\ngrid.nx=3\n", "grid.nx"),
    ("study.name=nope\ngrid.Nx=16\n", "study.name"),
    ("study.name=smoke\ngrid.Nx=16\nmollifier.delta=0.7\n", "mollifier.delta"),
    ("study.name=smoke\ngrid.Nx=16\nstudy.levels=2\n", "study.levels"),
    ("study.name=smoke\ngrid.Nx=16\ncontrol.kind=curved\n", "control.kind"),
    ("study.name=smoke\ngrid.Nx=15\n", "grid"),
    ("study.name=smoke\ngrid.Nx=16\nparams.mu1=-1\n", "params"),
])
def test_validation_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        validate(parse_config(text))
    assert str(exc.value).startswith(field)


def test_defaults_filled():
    cfg = validate(parse_config("study.name=smoke\ngrid.Nx=16\n"))
    assert cfg["grid.Ny"] == harness.DEFAULTS["grid.Ny"]
    assert cfg.grid.Nx == 16


def test_cli_validate_and_list(tmp_path, capsys):
    assert main(["validate", str(write_cfg(tmp_path, SMALL + "study.name=smoke\n"))]) == 0
    assert main(["validate", str(write_cfg(tmp_path, "study.name=smoke\n", "bad.cfg"))]) == 2
    assert main(["validate", str(tmp_path / "missing.cfg")]) == 2
    assert main(["list-studies"]) == 0
    listed = capsys.readouterr().out
    for name in harness.STUDIES:
        assert name in listed


def test_cli_smoke_run_writes_outputs(tmp_path):
    assert main(["run", str(write_cfg(tmp_path, SMALL + "study.name=smoke\n"))]) == 0
    rep = json.loads((tmp_path / "out" / "smoke.json").read_text())
    assert rep["passed"] and rep["metrics"]["zero_state"]["pass"]
    assert set(rep) >= {"config", "metrics", "passed", "runtime_seconds"}
    assert list(rep["config"]) == sorted(rep["config"])
    lines = (tmp_path / "out" / "smoke.csv").read_text().splitlines()
    assert lines[0] == "level,max_v,max_w,max_h" and len(lines) == 1 + 11


def test_unknown_study_exit_code(tmp_path):
    assert main(["run", str(write_cfg(tmp_path, SMALL + "study.name=bogus\n"))]) == 2


def test_zero_direction_reported_degenerate(tmp_path):
    body = SMALL + "study.name=taylor\nstudy.directions=1\ncontrol.direction_scale=0\n"
    code, res = harness.run_config(write_cfg(tmp_path, body))
    assert code == 0
    assert res.metrics["slope_0"].value == "degenerate"


def test_runs_are_reproducible(tmp_path):
    body = SMALL + "study.name=taylor\nstudy.directions=1\nseed=3\n"
    outs = []
    for k in range(2):
        p = tmp_path / f"r{k}.cfg"
        p.write_text(body + f"output.dir={tmp_path / str(k)}\n")
        assert harness.run_config(p)[0] == 0
        csv = (tmp_path / str(k) / "taylor.csv").read_text()
        rep = json.loads((tmp_path / str(k) / "taylor.json").read_text())
        rep.pop("runtime_seconds")
        rep["config"].pop("output.dir")
        outs.append((csv, rep))
    assert outs[0] == outs[1]


def test_solver_failure_exit_code(tmp_path):
    body = SMALL + "study.name=taylor\nstudy.directions=1\ncontrol.amplitude=1e6\n"
    with np.errstate(all="ignore"):
        assert main(["run", str(write_cfg(tmp_path, body))]) == 3


def test_acceptance_failure_exit_code(tmp_path, monkeypatch):
    def failing(cfg):
        res = studies.StudyResult(["x"], [(1.0,)])
        res.metrics["always"] = studies.at_most(1.0, 0.5)
        return res
    monkeypatch.setitem(harness.STUDIES, "smoke", failing)
    assert main(["run", str(write_cfg(tmp_path, SMALL + "study.name=smoke\n"))]) == 4
    rep = json.loads((tmp_path / "out" / "smoke.json").read_text())
    assert rep["passed"] is False and rep["metrics"]["always"]["pass"] is False
