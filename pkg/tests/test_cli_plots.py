import json
from pathlib import Path

import pytest

from dpslab.cli import main
from dpslab.errors import MissingArtifact
from dpslab.plots import emit_plots, read_series

from test_experiments import BASE

C1 = "1 -1.1 | 1 -1"
C_OPT = "1.31 -1.21 | 1.1 -1.1"
PLANT = "1 | 1 -1.1"


@pytest.fixture(scope="module")
def closed_form_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = d / "A_closed_form.ini"
    cfg.write_text(BASE.replace("out/x", str(d / "out")))
    return cfg, d / "out"


def test_list(capsys):
    assert main(["list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 9


def test_validate_exit_codes(tmp_path, closed_form_run, capsys):
    assert main(["validate", str(closed_form_run[0])]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text(BASE.replace("n = 10", "n = 0"))
    assert main(["validate", str(bad)]) == 2
    assert "problem.n" in capsys.readouterr().err


def test_run_passes_and_writes_report(closed_form_run, monkeypatch, capsys):
    monkeypatch.delenv("LAB_OUT", raising=False)
    cfg, out = closed_form_run
    assert main(["run", str(cfg), "--plots"]) == 0
    assert (out / "summary.json").is_file() and (out / "plots" / "error_trace.svg").is_file()
    assert "PASS" in capsys.readouterr().out


def test_run_with_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text(BASE.replace("[plant]\ntf = 1 | 1 -1.1\n", ""))
    assert main(["run", str(bad)]) == 2


def test_audit_exit_codes(tmp_path, capsys):
    assert main(["audit", "--plant", PLANT, "--controller", C1]) == 1
    assert "NO" in capsys.readouterr().out
    assert main(["audit", "--plant", PLANT, "--controller", C_OPT, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["internally_stable"] is True
    assert main(["audit", "--plant", "1 x | 1", "--controller", C1]) == 2
    pol = tmp_path / "policy.json"
    pol.write_text(json.dumps({"type": "PoleZero", "K": 1.0, "zeros": [1.1], "poles": [1.0]}))
    assert main(["audit", "--plant", PLANT, "--controller", str(pol)]) == 1
    assert main(["audit", "--plant", PLANT, "--controller", str(tmp_path / "missing.json")]) == 2


def test_plot_kinds(closed_form_run, tmp_path):
    cfg, out = closed_form_run
    if not (out / "summary.json").is_file():
        assert main(["run", str(cfg)]) == 0
    target = tmp_path / "e.svg"
    assert main(["plot", str(out), "--kind", "error_trace", "--out", str(target)]) == 0
    svg = target.read_text()
    assert svg.startswith("<?xml") and "A_closed_form" in svg
    # a closed-form run has no training history
    assert main(["plot", str(out), "--kind", "cost_history"]) == 2


def test_plots_are_deterministic(closed_form_run, tmp_path):
    cfg, out = closed_form_run
    if not (out / "summary.json").is_file():
        assert main(["run", str(cfg)]) == 0
    a = Path(emit_plots(out, "control_trace", tmp_path / "a.svg")).read_bytes()
    b = Path(emit_plots(out, "control_trace", tmp_path / "b.svg")).read_bytes()
    assert a == b


def test_missing_and_empty_series(tmp_path):
    with pytest.raises(MissingArtifact):
        read_series(tmp_path / "none.csv", "k", "e")
    empty = tmp_path / "empty.csv"
    empty.write_text("k,e\n")
    with pytest.raises(MissingArtifact):
        read_series(empty, "k", "e")
    with pytest.raises(MissingArtifact):
        emit_plots({"scenario": "x", "artifacts": {}, "_dir": str(tmp_path)}, "error_trace")
