import json
from pathlib import Path

import pytest

from dpslab.errors import ConfigError
from dpslab.experiments import (SCENARIOS, config_from_text, list_scenarios, load_config, load_report, run_scenario,
                                validate_config)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """[scenario]
id = A_closed_form
output_dir = out/x
seeds = 0

[plant]
tf = 1 | 1 -1.1

[problem]
a = 1.1
r0 = 1
n = 10
widths = 1 5
"""


def _diags(text):
    with pytest.raises(ConfigError) as exc:
        config_from_text(text)
    return exc.value.diagnostics


def test_catalog_lists_every_scenario():
    cat = list_scenarios()
    assert len(cat) == 9 and set(cat) == set(SCENARIOS)
    assert sorted(c for info in cat.values() for c in info.criteria) == list(range(1, 10))
    assert all(info.anchor and info.title for info in cat.values())


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    assert validate_config(path) == []
    assert load_config(path).scenario == path.stem


def test_base_config_parses():
    cfg = config_from_text(BASE)
    assert cfg.widths == (1, 5) and cfg.seeds == (0,)


def test_missing_plant_is_reported():
    d = _diags(BASE.replace("[plant]\ntf = 1 | 1 -1.1\n", ""))
    assert any(x.field.startswith("plant") for x in d)


def test_zero_pulse_width_is_rejected_with_line_number():
    d = _diags(BASE.replace("n = 10", "n = 0"))
    (x,) = [x for x in d if x.field == "problem.n"]
    assert x.line == BASE.splitlines().index("n = 10") + 1


def test_unknown_field_and_bad_scenario():
    d = _diags(BASE.replace("seeds = 0", "seeds = 0\ncolour = red"))
    assert any("colour" in x.field for x in d)
    d = _diags(BASE.replace("id = A_closed_form", "id = nope"))
    assert any(x.field == "scenario.id" for x in d)


def test_improper_plant_and_duplicate_seeds():
    d = _diags(BASE.replace("tf = 1 | 1 -1.1", "tf = 1 0 | 1 -1.1"))
    assert any(x.field == "plant.tf" for x in d)
    d = _diags(BASE.replace("seeds = 0", "seeds = 0 0"))
    assert any(x.field == "scenario.seeds" for x in d)


def test_validate_reports_every_problem_at_once(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(BASE.replace("n = 10", "n = 0").replace("seeds = 0", "seeds = 0 0"))
    assert len(validate_config(p)) >= 2


def _run_closed_form(tmp_path, name):
    cfg = config_from_text(BASE.replace("out/x", str(tmp_path / name)))
    return run_scenario(cfg)


def test_closed_form_run_is_byte_reproducible(tmp_path, monkeypatch):
    monkeypatch.delenv("LAB_OUT", raising=False)
    a = _run_closed_form(tmp_path, "a")
    b = _run_closed_form(tmp_path, "b")
    assert a.passed and b.passed
    da, db = Path(a.output_dir), Path(b.output_dir)
    csvs = sorted(p.relative_to(da) for p in da.rglob("*.csv"))
    assert csvs
    for rel in csvs:
        assert (da / rel).read_bytes() == (db / rel).read_bytes()
    rep = load_report(da / "summary.json")
    assert rep["criteria"]["1"]["passed"] is True
    assert all((da / a_["path"]).is_file() for arts in rep["artifacts"].values() for a_ in arts)


def test_lab_out_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_OUT", str(tmp_path / "env"))
    rep = run_scenario(config_from_text(BASE))
    assert Path(rep.output_dir) == tmp_path / "env" / "A_closed_form"
    assert json.loads((Path(rep.output_dir) / "summary.json").read_text())["scenario"] == "A_closed_form"
