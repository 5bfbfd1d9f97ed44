"""End-to-end acceptance criteria.

Every shipped scenario config is run once (outputs under a temporary
LAB_OUT); each criterion test then checks the scenario's recorded checks at
their stated tolerances and prints one PASS/FAIL line.  The property and
oracle suites are run directly.
"""
import os
from pathlib import Path

import pytest

from dpslab.experiments import SCENARIOS, load_config, run_scenario
from dpslab.properties import appendix_properties, oracle_equivalences

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS = {}


def _record(n: int, ok: bool, detail: str, capsys):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    with capsys.disabled():
        print("\n" + line)
    return ok


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    old = os.environ.get("LAB_OUT")
    os.environ["LAB_OUT"] = str(tmp_path_factory.mktemp("acceptance"))
    try:
        out = {}
        for sid in SCENARIOS:
            out[sid] = run_scenario(load_config(CONFIGS / f"{sid}.ini"))
        return out
    finally:
        if old is None:
            os.environ.pop("LAB_OUT", None)
        else:
            os.environ["LAB_OUT"] = old


def _scenario_for(n):
    (sid,) = [s for s, info in SCENARIOS.items() if n in info.criteria]
    return sid


def _describe(checks):
    parts = []
    for c in checks:
        mark = "" if c.passed else " (x)"
        parts.append(f"{c.name}={c.value:.6g}{mark}")
    return "; ".join(parts)


@pytest.mark.parametrize("n", range(1, 10))
def test_scenario_criterion(n, reports, capsys):
    sid = _scenario_for(n)
    rep = reports[sid]
    checks = rep.checks.get(n, [])
    ok = bool(checks) and not rep.diagnostics and all(c.passed for c in checks)
    detail = f"[{sid}, {rep.runtime_s:.0f} s] " + (_describe(checks) or "; ".join(rep.diagnostics) or "no checks")
    assert _record(n, ok, detail, capsys), detail


def test_criterion_10_appendix_properties(capsys):
    worst = {k: 0.0 for k in ("bezout_first_order", "bezout_state_space", "coprime_plant_match",
                              "inner_norm_preservation", "lft_affinity", "lft_closed_form")}
    unstable = 0
    for seed in (0, 1):
        p = appendix_properties(seed)
        for k in worst:
            worst[k] = max(worst[k], p[k])
        unstable += p["youla_unstable_count"]
    ok = all(v <= 1e-8 for v in worst.values()) and unstable == 0
    detail = "; ".join(f"{k}={v:.2e}" for k, v in worst.items()) + f"; youla_unstable={unstable}/100"
    assert _record(10, ok, detail, capsys), detail


def test_criterion_11_oracle_equivalences(capsys):
    p = oracle_equivalences(0)
    ok = (p["gramian_vs_impulse"] <= 1e-8 and p["four_maps_vs_simulation"] <= 1e-8
          and p["verdict_mismatches"] == 0)
    detail = (f"gramian_vs_impulse={p['gramian_vs_impulse']:.2e}; "
              f"four_maps_vs_simulation={p['four_maps_vs_simulation']:.2e}; "
              f"verdict_mismatches={p['verdict_mismatches']}/100 "
              f"({p['pairs_with_unstable_cancellation']} with an unstable cancellation)")
    assert _record(11, ok, detail, capsys), detail
