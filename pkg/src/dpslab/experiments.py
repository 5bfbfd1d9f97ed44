"""Named experiment scenarios: configuration, execution and export.

Configuration files are INI text read with :mod:`configparser`; the grammar
is documented in ``configs/README.md``.  Every scenario writes time-series
CSVs (k, r, w, e, u, y), cost histories (iter, best_cost), a per-seed table,
a metrics table and a versioned ``summary.json`` into its output directory.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .audit import (AuditVerdict, audit_policy, cancellation_detector, empirical_instability_probe,
                    ensemble_growth, internal_stability)
from .errors import ConfigError, LabError
from .optim import NelderMeadConfig
from .policies import Neural, Policy, PoleZero, policy_from_dict, published_neural, published_prestabilizer
from .search import LossSpec, evaluate_loss, prestabilize, train_composite, train_policy
from .simulate import NoiseSpec, PulseSpec, SimResult, derive_seed, l2_truncated, make_pulse, simulate_loop
from .tf import RationalTF, l2_norm, tf_from_text
from .youla import (FirstOrderProblem, closed_form_optimum, first_order_factors, interpolation_report,
                    model_match_fir, pulse_tf, q_from_qtilde, youla_controller)

SCHEMA_VERSION = 1
LEARNED_CANCEL_TOL = 0.02


@dataclass(frozen=True)
class ScenarioInfo:
    title: str
    anchor: str
    criteria: Tuple[int, ...]


SCENARIOS: Dict[str, ScenarioInfo] = {
    "A_closed_form": ScenarioInfo(
        "Closed-form optimal Youla controller", "optimal cost a r0 sqrt(2) of the internally stabilizing optimum", (1,)),
    "A_fir_search": ScenarioInfo(
        "FIR model matching over the Youla parameter", "model-matching recovery of the optimal Qtilde = -a", (2,)),
    "B_direct": ScenarioInfo(
        "Direct pole/zero policy search", "super-optimal C1 = (z - a)/(z - 1) and its unbounded output", (3,)),
    "B_noise_on_r": ScenarioInfo(
        "Policy search with reference noise", "training with w ~ N(0, 0.1) added to the reference", (4,)),
    "B_regularized": ScenarioInfo(
        "Policy search with a control penalty", "regularized objective ||e|| + ||u|| still cancels at a", (5,)),
    "C_neural": ScenarioInfo(
        "ReLU network policy search", "neural controller with published weights and its divergence", (6,)),
    "mitigate_noise_training": ScenarioInfo(
        "Mitigation by training under control noise", "noise during training, about 25% degradation", (7,)),
    "mitigate_prestabilize": ScenarioInfo(
        "Mitigation by prestabilization", "prestabilized composite controller, near optimal cost", (8,)),
    "nonmin_phase_placement": ScenarioInfo(
        "Noise placement on a non-minimum-phase plant", "reference perturbation leads to unbounded control", (9,)),
}

TRAINING_SCENARIOS = {"B_direct", "B_noise_on_r", "B_regularized", "C_neural", "mitigate_noise_training",
                      "mitigate_prestabilize", "nonmin_phase_placement"}


def list_scenarios() -> Dict[str, ScenarioInfo]:
    return dict(SCENARIOS)


# --------------------------------------------------------------------- config

@dataclass(frozen=True)
class PolicyConfig:
    template: str = "PoleZero"
    zeros: int = 1
    poles: int = 1
    init: Tuple[float, ...] = ()
    hidden: int = 2
    memory: int = 1
    init_scale: float = 0.3
    warm_step_scale: float = 0.1
    prestabilizer: str = "StaticGain"

    def build(self) -> Policy:
        if self.template == "PoleZero":
            x = np.array(self.init if self.init else [1.0] + [0.5] * (self.zeros + self.poles))
            return PoleZero(1.0, (0.0,) * self.zeros, (0.0,) * self.poles).from_vector(x)
        tmpl = Neural(np.zeros((self.hidden, 2 * self.memory + 1)), np.zeros((1, self.hidden)), self.memory)
        return tmpl.from_vector(np.array(self.init)) if self.init else tmpl


@dataclass(frozen=True)
class ProbeConfig:
    kind: str = "gaussian"
    scale: float = 0.1
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    horizon: int = 200
    cap: float = 1e6
    bounded_horizon: int = 500
    growth_horizon: int = 2000
    growth_seeds: int = 16
    unbounded_ratio: float = 2.0
    bounded_ratio: float = 1.5

    def spec(self, seed: int, injection: str) -> NoiseSpec:
        return NoiseSpec(self.kind, self.scale, derive_seed(seed, 0 if injection == "at_control_u" else 1), injection)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    plant: RationalTF
    problem: FirstOrderProblem = FirstOrderProblem()
    loss: LossSpec = LossSpec()
    optimizer: NelderMeadConfig = NelderMeadConfig()
    seeds: Tuple[int, ...] = tuple(range(20))
    output_dir: str = "out"
    policy: PolicyConfig = PolicyConfig()
    probe: ProbeConfig = ProbeConfig()
    reference_controller: Optional[RationalTF] = None
    widths: Tuple[int, ...] = (1, 5, 10, 20)
    fir_poles: Tuple[float, ...] = (1.1, 2.0)
    fir_orders: Tuple[int, ...] = (1, 3, 6)
    workers: int = 1
    plots: bool = False
    prestabilizer_policy: Optional[dict] = None  # filled in by the prestabilization stage

    def resolved_output_dir(self) -> Path:
        root = os.environ.get("LAB_OUT")
        return Path(root) / self.scenario if root else Path(self.output_dir)

    def to_dict(self) -> dict:
        loss = self.loss
        return {
            "scenario": self.scenario, "plant": self.plant.to_text(),
            "problem": {"a": self.problem.a, "r0": self.problem.r0, "n": self.problem.n},
            "loss": {"pulses": [[p.r0, p.n] for p in loss.training_pulses], "horizon": loss.horizon,
                     "warmup_horizons": list(loss.warmup_horizons), "control_penalty": loss.control_penalty,
                     "normalize_by_r0": loss.normalize_by_r0, "diverged_cost": loss.diverged_cost, "cap": loss.cap,
                     "noise": asdict(loss.noise)},
            "optimizer": asdict(self.optimizer), "seeds": list(self.seeds), "policy": asdict(self.policy),
            "probe": asdict(self.probe),
            "reference_controller": None if self.reference_controller is None else self.reference_controller.to_text(),
            "widths": list(self.widths), "fir_poles": list(self.fir_poles), "fir_orders": list(self.fir_orders),
        }


@dataclass(frozen=True)
class Diagnostic:
    field: str
    line: Optional[int]
    message: str

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.message}"


def _line_index(text: str) -> Dict[Tuple[str, str], int]:
    """(section, key) -> 1-based line number, for diagnostics."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, "")] = i
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = i
    return out


def _split(value: str) -> List[str]:
    return [t for t in re.split(r"[,\s]+", value.strip()) if t]


def _int_list(value: str) -> Tuple[int, ...]:
    out = []
    for tok in _split(value):
        m = re.fullmatch(r"(-?\d+)-(-?\d+)", tok)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ValueError(f"empty range {tok!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _float_list(value: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in _split(value))


def _pulses(value: str) -> Tuple[PulseSpec, ...]:
    out = []
    for tok in _split(value):
        r0, _, n = tok.partition(":")
        if not n:
            raise ValueError(f"pulse {tok!r} is not of the form r0:n")
        if float(n) != int(float(n)):
            raise ValueError(f"pulse width {n!r} is not an integer")
        out.append(PulseSpec(float(r0), int(float(n))))
    return tuple(out)


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


# (section, key) -> (parser, required-for predicate)
_ALL = lambda s: True  # noqa: E731
_TRAIN = lambda s: s in TRAINING_SCENARIOS  # noqa: E731
_SCHEMA = {
    ("scenario", "id"): (str, _ALL),
    ("scenario", "output_dir"): (str, _ALL),
    ("scenario", "seeds"): (_int_list, _ALL),
    ("scenario", "workers"): (int, None),
    ("scenario", "plots"): (_bool, None),
    ("plant", "tf"): (tf_from_text, _ALL),
    ("problem", "a"): (float, lambda s: s != "nonmin_phase_placement"),
    ("problem", "r0"): (float, None),
    ("problem", "n"): (int, None),
    ("problem", "widths"): (_int_list, lambda s: s == "A_closed_form"),
    ("problem", "fir_poles"): (_float_list, lambda s: s == "A_fir_search"),
    ("problem", "fir_orders"): (_int_list, lambda s: s == "A_fir_search"),
    ("loss", "pulses"): (_pulses, _TRAIN),
    ("loss", "horizon"): (int, _TRAIN),
    ("loss", "warmup_horizons"): (_int_list, None),
    ("loss", "control_penalty"): (float, None),
    ("loss", "normalize_by_r0"): (_bool, None),
    ("loss", "diverged_cost"): (float, None),
    ("loss", "cap"): (float, None),
    ("loss", "noise_kind"): (str, None),
    ("loss", "noise_sigma"): (float, None),
    ("loss", "noise_variance"): (float, None),
    ("loss", "noise_injection"): (str, None),
    ("loss", "noise_seed"): (int, None),
    ("optimizer", "x_tol"): (float, None),
    ("optimizer", "f_tol"): (float, None),
    ("optimizer", "max_iters"): (int, None),
    ("optimizer", "restarts"): (int, None),
    ("optimizer", "initial_step"): (float, None),
    ("optimizer", "restart_step_scale"): (float, None),
    ("policy", "template"): (str, _TRAIN),
    ("policy", "zeros"): (int, None),
    ("policy", "poles"): (int, None),
    ("policy", "init"): (_float_list, None),
    ("policy", "hidden"): (int, None),
    ("policy", "memory"): (int, None),
    ("policy", "init_scale"): (float, None),
    ("policy", "warm_step_scale"): (float, None),
    ("policy", "prestabilizer"): (str, lambda s: s == "mitigate_prestabilize"),
    ("probe", "kind"): (str, None),
    ("probe", "scale"): (float, None),
    ("probe", "seeds"): (_int_list, None),
    ("probe", "horizon"): (int, None),
    ("probe", "cap"): (float, None),
    ("probe", "bounded_horizon"): (int, None),
    ("probe", "growth_horizon"): (int, None),
    ("probe", "growth_seeds"): (int, None),
    ("probe", "unbounded_ratio"): (float, None),
    ("probe", "bounded_ratio"): (float, None),
    ("reference", "controller"): (tf_from_text, lambda s: s in ("B_direct", "nonmin_phase_placement")),
}


def _parse(text: str, source: str = "<config>"):
    """Parse config text into (ScenarioConfig or None, diagnostics)."""
    diags: List[Diagnostic] = []
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.ParsingError as exc:
        for lineno, line in exc.errors:
            diags.append(Diagnostic("syntax", lineno, f"cannot parse {line!r}"))
        return None, diags
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        return None, [Diagnostic("syntax", line, str(exc).splitlines()[0])]
    lines = _line_index(text)

    def where(sec, key=""):
        return lines.get((sec, key)) or lines.get((sec, ""))

    scenario = cp.get("scenario", "id", fallback=None) if cp.has_section("scenario") else None
    if scenario is None:
        return None, [Diagnostic("scenario.id", where("scenario"), "missing required field")]
    scenario = scenario.strip()
    if scenario not in SCENARIOS:
        return None, [Diagnostic("scenario.id", where("scenario", "id"),
                                 f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")]

    vals = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            if (sec, key) not in _SCHEMA:
                diags.append(Diagnostic(f"{sec}.{key}", where(sec, key), "unknown field"))
                continue
            try:
                vals[(sec, key)] = _SCHEMA[(sec, key)][0](raw)
            except (ValueError, LabError) as exc:
                diags.append(Diagnostic(f"{sec}.{key}", where(sec, key), f"invalid value {raw!r}: {exc}"))
    for (sec, key), (_, required) in _SCHEMA.items():
        if required is not None and required(scenario) and (sec, key) not in vals \
                and not any(d.field == f"{sec}.{key}" for d in diags):
            diags.append(Diagnostic(f"{sec}.{key}", where(sec), "missing required field"))
    if diags:
        return None, diags

    def get(sec, key, default):
        return vals.get((sec, key), default)

    def check(cond, sec, key, msg):
        if not cond:
            diags.append(Diagnostic(f"{sec}.{key}", where(sec, key), msg))

    plant = vals[("plant", "tf")]
    check(plant.is_strictly_proper(), "plant", "tf", "plant must be strictly proper")
    a = get("problem", "a", 1.1)
    n = get("problem", "n", 10)
    problem = None
    if n < 1:
        check(False, "problem", "n", f"pulse width {n} violates n >= 1")
    else:
        try:
            problem = FirstOrderProblem(a, get("problem", "r0", 1.0), n)
        except (ValueError, LabError) as exc:
            diags.append(Diagnostic("problem.a", where("problem", "a"), str(exc)))
    if scenario not in ("nonmin_phase_placement",) and problem is not None:
        ref = RationalTF([1.0], [1.0, -a])
        check(plant.normalized().num.allclose(ref.num) and plant.normalized().den.allclose(ref.den),
              "plant", "tf", f"scenario {scenario} needs the plant 1/(z - a) with a = {a}")
    seeds = vals[("scenario", "seeds")]
    check(len(seeds) > 0, "scenario", "seeds", "at least one seed is required")
    check(len(set(seeds)) == len(seeds), "scenario", "seeds", "seeds must be distinct")
    check(get("scenario", "workers", 1) >= 1, "scenario", "workers", "must be at least 1")
    for w in get("problem", "widths", ()):
        check(w >= 1, "problem", "widths", f"pulse width {w} violates n >= 1")
    check(all(p > 1.0 for p in get("problem", "fir_poles", (1.1,))), "problem", "fir_poles", "poles must exceed 1")
    check(all(m >= 1 for m in get("problem", "fir_orders", (1,))), "problem", "fir_orders", "orders must be >= 1")

    noise = NoiseSpec()
    if ("loss", "noise_sigma") in vals and ("loss", "noise_variance") in vals:
        check(False, "loss", "noise_variance", "give noise_sigma or noise_variance, not both")
    kind = get("loss", "noise_kind", "none")
    if kind != "none":
        sigma = vals.get(("loss", "noise_sigma"))
        if ("loss", "noise_variance") in vals:
            var = vals[("loss", "noise_variance")]
            check(var >= 0, "loss", "noise_variance", "variance must be non-negative")
            sigma = math.sqrt(max(var, 0.0))
        check(sigma is not None, "loss", "noise_sigma", f"noise kind {kind!r} needs noise_sigma or noise_variance")
        try:
            noise = NoiseSpec(kind, sigma or 0.0, get("loss", "noise_seed", 0),
                              get("loss", "noise_injection", "at_control_u"))
        except ValueError as exc:
            diags.append(Diagnostic("loss.noise_kind", where("loss", "noise_kind"), str(exc)))
    loss = optimizer = policy = probe = None
    try:
        loss = LossSpec(get("loss", "pulses", LossSpec().training_pulses), noise, get("loss", "horizon", 100),
                        get("loss", "control_penalty", 0.0), get("loss", "normalize_by_r0", True),
                        get("loss", "diverged_cost", 1e4), get("loss", "cap", 1e6),
                        get("loss", "warmup_horizons", ()))
    except ValueError as exc:
        diags.append(Diagnostic("loss", where("loss"), str(exc)))
    try:
        optimizer = NelderMeadConfig(**{k: vals[("optimizer", k)] for s, k in vals if s == "optimizer"})
    except ValueError as exc:
        diags.append(Diagnostic("optimizer", where("optimizer"), str(exc)))
    pkw = {k: vals[("policy", k)] for s, k in vals if s == "policy"}
    policy = PolicyConfig(**pkw)
    check(policy.template in ("PoleZero", "Neural"), "policy", "template", "must be PoleZero or Neural")
    check(policy.prestabilizer in ("StaticGain", "NeuralStaticGain"), "policy", "prestabilizer",
          "must be StaticGain or NeuralStaticGain")
    check(policy.init_scale >= 0, "policy", "init_scale", "must be non-negative")
    if policy.template == "PoleZero":
        check(policy.zeros <= policy.poles, "policy", "zeros", "a proper controller needs zeros <= poles")
        check(not policy.init or len(policy.init) == 1 + policy.zeros + policy.poles, "policy", "init",
              f"expected {1 + policy.zeros + policy.poles} values (K, zeros, poles)")
    else:
        n = policy.hidden * (2 * policy.memory + 2)
        check(not policy.init or len(policy.init) == n, "policy", "init", f"expected {n} network weights")
    probe = ProbeConfig(**{k: vals[("probe", k)] for s, k in vals if s == "probe"})
    check(probe.kind in ("gaussian", "binary"), "probe", "kind", "must be gaussian or binary")
    check(probe.scale > 0, "probe", "scale", "must be positive")
    check(len(probe.seeds) > 0, "probe", "seeds", "at least one probe seed is required")
    for k in ("horizon", "bounded_horizon", "growth_horizon", "growth_seeds"):
        check(getattr(probe, k) >= 1, "probe", k, "must be positive")
    if loss is not None and problem is not None and scenario in TRAINING_SCENARIOS:
        check(loss.horizon >= problem.n, "loss", "horizon", "evaluation horizon shorter than the pulse width n")
    if diags:
        return None, diags
    cfg = ScenarioConfig(scenario, plant, problem, loss, optimizer, seeds, vals[("scenario", "output_dir")],
                         policy, probe, vals.get(("reference", "controller")),
                         get("problem", "widths", (1, 5, 10, 20)), get("problem", "fir_poles", (1.1, 2.0)),
                         get("problem", "fir_orders", (1, 3, 6)), get("scenario", "workers", 1),
                         get("scenario", "plots", False))
    return cfg, []


def validate_config(path) -> List[Diagnostic]:
    """Diagnostics for a config file; an empty list means it is runnable."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        return [Diagnostic("file", None, str(exc))]
    return _parse(text, str(path))[1]


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc), "file") from exc
    return config_from_text(text, str(path))


def config_from_text(text: str, source: str = "<config>") -> ScenarioConfig:
    cfg, diags = _parse(text, source)
    if diags:
        err = ConfigError("; ".join(str(d) for d in diags), diags[0].field, diags[0].line)
        err.diagnostics = diags
        raise err
    return cfg


# --------------------------------------------------------------------- report

@dataclass
class Check:
    name: str
    value: float
    lo: float = -math.inf
    hi: float = math.inf

    @property
    def passed(self) -> bool:
        return bool(self.lo <= self.value <= self.hi)

    def to_dict(self):
        return {"name": self.name, "value": _num(self.value), "lo": _num(self.lo), "hi": _num(self.hi),
                "passed": self.passed}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


@dataclass
class ExperimentReport:
    scenario: str
    achieved_cost: Optional[float] = None
    reference_cost: Dict[str, Optional[float]] = field(default_factory=dict)
    audit: Optional[AuditVerdict] = None
    probes: List[dict] = field(default_factory=list)
    artifacts: Dict[str, List[dict]] = field(default_factory=dict)
    checks: Dict[int, List[Check]] = field(default_factory=dict)
    metrics: Dict[str, float] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)
    runtime_s: float = 0.0
    output_dir: str = ""

    @property
    def flags(self) -> Dict[int, bool]:
        crit = SCENARIOS[self.scenario].criteria
        return {k: (not self.diagnostics) and bool(self.checks.get(k)) and all(c.passed for c in self.checks[k])
                for k in crit}

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        info = SCENARIOS[self.scenario]
        return {
            "schema_version": SCHEMA_VERSION, "scenario": self.scenario, "title": info.title, "anchor": info.anchor,
            "achieved_cost": _num(self.achieved_cost),
            "reference_cost": {k: _num(v) for k, v in self.reference_cost.items()},
            "audit": None if self.audit is None else self.audit.to_dict(),
            "probes": self.probes, "artifacts": self.artifacts,
            "criteria": {str(k): {"passed": self.flags[k], "checks": [c.to_dict() for c in self.checks.get(k, [])]}
                         for k in info.criteria},
            "metrics": {k: _num(v) for k, v in self.metrics.items()},
            "diagnostics": self.diagnostics, "runtime_s": round(self.runtime_s, 3), "passed": self.passed,
        }

    def summary_lines(self) -> List[str]:
        out = []
        for k, ok in self.flags.items():
            detail = ", ".join(f"{c.name}={c.value:.6g}" for c in self.checks.get(k, []))
            out.append(f"criterion {k:2d} [{self.scenario}]: {'PASS' if ok else 'FAIL'}  {detail}")
        out.extend(f"  error: {d}" for d in self.diagnostics)
        return out


def load_report(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / "summary.json"
    if not p.exists():
        from .errors import MissingArtifact
        raise MissingArtifact(f"no report at {p}")
    d = json.loads(p.read_text())
    d["_dir"] = str(p.parent)
    return d


# --------------------------------------------------------------------- helpers

def _write_rows(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _artifact(report: ExperimentReport, kind: str, path: Path, label: str):
    report.artifacts.setdefault(kind, []).append(
        {"label": label, "path": str(path.relative_to(report.output_dir))})


def _nominal_run(plant, policy, p: FirstOrderProblem, horizon: int) -> SimResult:
    return simulate_loop(plant, policy, make_pulse(PulseSpec(p.r0, p.n), horizon), NoiseSpec(), horizon)


def _roots_of(policy) -> Tuple[List[complex], List[complex]]:
    C = policy.transfer_function() if isinstance(policy, Policy) else policy
    if C is None:
        return [], []
    return list(C.zeros()), list(C.poles())


def _fmt_roots(rs) -> str:
    return " ".join(f"{r.real:.6f}" if abs(r.imag) < 1e-12 else f"{r.real:.6f}{r.imag:+.6f}j" for r in rs)


def _unstable_plant_roots(plant: RationalTF):
    poles = [complex(p) for p in plant.poles() if abs(p) >= 1.0]
    zeros = [complex(z) for z in plant.zeros() if abs(z) >= 1.0]
    return poles, zeros


def _train_one(args):
    """Worker: train one seed, write its subdirectory, return a plain dict."""
    cfg, seed, out = args
    out = Path(out)
    template = cfg.policy.build()
    kw = dict(init_scale=cfg.policy.init_scale, warm_step_scale=cfg.policy.warm_step_scale)
    if cfg.scenario == "mitigate_prestabilize":
        C_ps = policy_from_dict(cfg.prestabilizer_policy)
        pol, trace = train_composite(cfg.plant, C_ps, cfg.loss, cfg.optimizer, seed=seed, template=template, **kw)
    else:
        pol, trace = train_policy(template, cfg.plant, cfg.loss, cfg.optimizer, seed=seed, **kw)
    sd = out / f"seed_{seed:02d}"
    sd.mkdir(parents=True, exist_ok=True)
    _write_rows(sd / "cost_history.csv", ["iter", "best_cost"], trace.to_rows())
    sim = _nominal_run(cfg.plant, pol, cfg.problem, cfg.loss.horizon)
    sim.to_csv(sd / "timeseries.csv")
    (sd / "policy.json").write_text(json.dumps(pol.to_dict(), indent=2) + "\n")
    return {"seed": seed, "policy": pol.to_dict(), "train_loss": float(trace.final_cost),
            "nominal_cost": l2_truncated(sim.e) if not sim.diverged else math.inf,
            "nominal_diverged": sim.diverged}


def _train_seeds(cfg: ScenarioConfig, out: Path) -> List[dict]:
    jobs = [(cfg, s, str(out)) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    return sorted(results, key=lambda r: r["seed"])


def _seed_table(cfg, results, out: Path, extra_cols=()):
    """Annotate per-seed results with audit facts and write seeds.csv."""
    poles_u, zeros_u = _unstable_plant_roots(cfg.plant)
    rows = []
    for r in results:
        pol = policy_from_dict(r["policy"])
        C = pol.transfer_function()
        if C is not None:
            v = internal_stability(cfg.plant, C)
            canc = [c for c in cancellation_detector(cfg.plant, C, LEARNED_CANCEL_TOL) if c.unstable]
            r["internally_stable"] = v.internally_stable
            r["unstable_cancellation"] = bool(canc)
            r["cancelled_root"] = canc[0].root.real if canc else math.nan
            r["zeros"], r["poles"] = _fmt_roots(C.zeros()), _fmt_roots(C.poles())
        else:
            r["internally_stable"], r["unstable_cancellation"] = None, None
            r["cancelled_root"], r["zeros"], r["poles"] = math.nan, "", ""
        rows.append(r)
    header = ["seed", "train_loss", "nominal_cost", "internally_stable", "unstable_cancellation",
              "cancelled_root", "zeros", "poles", *extra_cols]
    _write_rows(out / "seeds.csv", header, [[r.get(h, "") for h in header] for r in rows])
    return rows


def _median_seed(rows, key="nominal_cost"):
    """The seed whose value is the lower median, so a real run represents the median."""
    order = sorted(rows, key=lambda r: (r[key], r["seed"]))
    return order[(len(order) - 1) // 2]


def _stats(report, name, values):
    v = np.asarray(values, dtype=float)
    report.metrics[f"{name}_median"] = float(np.median(v))
    report.metrics[f"{name}_min"] = float(np.min(v))
    report.metrics[f"{name}_max"] = float(np.max(v))


def _probe_runs(report, cfg, plant, policy, injection, out: Path, tag: str, horizon=None):
    """Probe one policy under every probe seed; writes one CSV per run."""
    pc = cfg.probe
    horizon = horizon or pc.horizon
    specs = [pc.spec(s, injection) for s in pc.seeds]
    results = empirical_instability_probe(plant, policy, specs, horizon, pc.cap)
    for s, res in zip(pc.seeds, results):
        path = out / "probes" / f"{tag}_{injection}_seed{s:02d}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        res.sim.to_csv(path)
        d = res.to_dict()
        d.update({"policy": tag, "probe_seed": s, "csv": str(path.relative_to(out))})
        report.probes.append(d)
    return results


def _probe_metrics(report, name, results, sigma):
    div = [p for p in results if p.diverged]
    report.metrics[f"{name}_diverged_fraction"] = len(div) / len(results)
    growth = [p.growth_ratio for p in div if p.growth_ratio is not None]
    report.metrics[f"{name}_growth_min"] = min(growth) if growth else math.nan
    report.metrics[f"{name}_growth_max"] = max(growth) if growth else math.nan
    report.metrics[f"{name}_max_du_over_sigma"] = max(p.max_du for p in results) / sigma
    return div, growth


def _references(report, p: FirstOrderProblem):
    report.reference_cost = {"optimal": p.optimal_cost, "super_optimal": abs(p.r0) * math.sqrt(2.0)}


# --------------------------------------------------------------------- scenarios

def _run_A_closed_form(cfg, report, out):
    ref = cfg.problem.optimal_cost
    rows, worst_l2, worst_sim, worst_res, stable = [], 0.0, 0.0, 0.0, True
    for n in cfg.widths:
        p = FirstOrderProblem(cfg.problem.a, cfg.problem.r0, n)
        sol = closed_form_optimum(p)
        l2 = l2_norm(sol.S * pulse_tf(p.r0, n))
        H = max(cfg.loss.horizon, n + 10)
        sim = simulate_loop(cfg.plant, sol.C, make_pulse(PulseSpec(p.r0, n), H), NoiseSpec(), H)
        cs = l2_truncated(sim.e)
        res = max(e.residual for e in interpolation_report(sol.S, cfg.plant))
        v = internal_stability(cfg.plant, sol.C)
        stable &= v.internally_stable
        path = out / f"timeseries_n{n:02d}.csv"
        sim.to_csv(path)
        _artifact(report, "error_trace", path, f"optimal C, n={n}")
        _artifact(report, "control_trace", path, f"optimal C, n={n}")
        rows.append([n, l2, cs, ref, res, v.internally_stable])
        worst_l2, worst_sim, worst_res = max(worst_l2, abs(l2 - ref)), max(worst_sim, abs(cs - ref)), max(worst_res, res)
        if n == cfg.problem.n:
            report.achieved_cost = l2
            report.audit = v
            (out / "optimal_solution.json").write_text(sol.to_json() + "\n")
    _write_rows(out / "widths.csv", ["n", "cost_l2_norm", "cost_simulation", "reference", "interp_residual",
                                     "internally_stable"], rows)
    if report.achieved_cost is None:
        report.achieved_cost = rows[0][1]
        report.audit = internal_stability(cfg.plant, closed_form_optimum(cfg.problem).C)
    report.metrics.update(max_cost_error_l2=worst_l2, max_cost_error_sim=worst_sim, max_interp_residual=worst_res,
                          all_internally_stable=float(stable))
    report.checks[1] = [Check("max_cost_error_l2", worst_l2, hi=1e-6), Check("max_cost_error_sim", worst_sim, hi=1e-6),
                        Check("max_interp_residual", worst_res, hi=1e-9),
                        Check("all_internally_stable", float(stable), lo=1.0)]


def _run_A_fir_search(cfg, report, out):
    rows, worst_q, worst_c = [], 0.0, 0.0
    for a in cfg.fir_poles:
        p = FirstOrderProblem(a, cfg.problem.r0, cfg.problem.n)
        for m in cfg.fir_orders:
            fq, cost = model_match_fir(p, m, "worst_case", cfg.optimizer)
            target = np.zeros(m)
            target[0] = -a
            qe = float(np.max(np.abs(np.array(fq.q) - target)))
            ce = abs(cost - p.optimal_cost)
            fw, fw_cost = model_match_fir(p, m, "fixed_width", cfg.optimizer)
            rows.append([a, m, cost, p.optimal_cost, qe, ce, " ".join(f"{v:.10f}" for v in fq.q),
                         fw_cost, " ".join(f"{v:.10f}" for v in fw.q)])
            worst_q, worst_c = max(worst_q, qe), max(worst_c, ce)
            if a == cfg.problem.a and m == max(cfg.fir_orders):
                C = youla_controller(first_order_factors(a), q_from_qtilde(fq.as_tf(), a))
                sim = _nominal_run(p.plant, C, p, cfg.loss.horizon)
                path = out / f"timeseries_a{a:g}_m{m}.csv"
                sim.to_csv(path)
                _artifact(report, "error_trace", path, f"FIR Q, a={a:g}, m={m}")
                _artifact(report, "control_trace", path, f"FIR Q, a={a:g}, m={m}")
                report.achieved_cost = l2_truncated(sim.e)
                report.audit = internal_stability(p.plant, C)
    _write_rows(out / "fir.csv", ["a", "m", "worst_case_cost", "reference", "q_error", "cost_error", "q",
                                  "fixed_width_cost", "fixed_width_q"], rows)
    report.metrics.update(max_q_error=worst_q, max_cost_error=worst_c)
    report.checks[2] = [Check("max_q_error", worst_q, hi=1e-4), Check("max_cost_error", worst_c, hi=1e-6)]


def _training_common(cfg, report, out, rows):
    costs = [r["nominal_cost"] for r in rows]
    _stats(report, "nominal_cost", costs)
    report.metrics["unstable_cancellations"] = sum(bool(r["unstable_cancellation"]) for r in rows)
    report.metrics["internally_stable_seeds"] = sum(bool(r["internally_stable"]) for r in rows)
    report.metrics["seeds"] = len(rows)
    report.achieved_cost = report.metrics["nominal_cost_median"]
    med = _median_seed(rows)
    report.metrics["median_seed"] = med["seed"]
    sd = out / f"seed_{med['seed']:02d}"
    _artifact(report, "error_trace", sd / "timeseries.csv", f"median seed {med['seed']}")
    _artifact(report, "control_trace", sd / "timeseries.csv", f"median seed {med['seed']}")
    _artifact(report, "cost_history", sd / "cost_history.csv", f"median seed {med['seed']}")
    pol = policy_from_dict(med["policy"])
    C = pol.transfer_function()
    if C is not None:
        report.audit = internal_stability(cfg.plant, C)
        report.audit.cancellations = cancellation_detector(cfg.plant, C, LEARNED_CANCEL_TOL)
    return med, pol


def _reference_runs(cfg, report, out, controllers):
    """Noise-free runs of fixed controllers for comparison plots."""
    for tag, C in controllers:
        sim = _nominal_run(cfg.plant, C, cfg.problem, cfg.loss.horizon)
        path = out / f"reference_{tag}.csv"
        sim.to_csv(path)
        _artifact(report, "comparison", path, tag)
        report.metrics[f"{tag}_cost"] = l2_truncated(sim.e)


def _near(rows, target, tol):
    return sum(1 for r in rows if r["unstable_cancellation"] and abs(r["cancelled_root"] - target) <= tol)


def _run_B_direct(cfg, report, out):
    rows = _seed_table(cfg, _train_seeds(cfg, out), out)
    med, pol = _training_common(cfg, report, out, rows)
    a, p = cfg.problem.a, cfg.problem
    n_flag = _near(rows, a, LEARNED_CANCEL_TOL)
    report.metrics["cancellations_near_a"] = n_flag
    C1 = cfg.reference_controller
    v1 = internal_stability(cfg.plant, C1)
    root_err = min(abs(r - a) for r in v1.closed_loop_roots.roots)
    report.metrics["C1_char_root_error"] = root_err
    _reference_runs(cfg, report, out, [("optimal", closed_form_optimum(p).C), ("C1", C1)])
    _artifact(report, "comparison", out / f"seed_{med['seed']:02d}" / "timeseries.csv", "learned (median)")
    probes = _probe_runs(report, cfg, cfg.plant, C1, "at_control_u", out, "C1")
    div, growth = _probe_metrics(report, "C1_probe", probes, cfg.probe.scale)
    _artifact(report, "error_trace", out / report.probes[0]["csv"], "C1 under control noise")
    _artifact(report, "control_trace", out / report.probes[0]["csv"], "C1 under control noise")
    need = math.ceil(0.9 * len(rows))
    report.checks[3] = [
        Check("median_cost", report.achieved_cost, hi=abs(p.r0) * math.sqrt(2) + 0.01),
        Check("cancellations_near_a", n_flag, lo=need),
        Check("C1_char_root_error", root_err, hi=1e-6),
        Check("C1_probe_diverged_fraction", len(div) / len(probes), lo=0.5 + 1e-12),
        Check("C1_probe_growth_min", min(growth) if growth else math.nan, lo=a - 0.05, hi=a + 0.05),
        Check("C1_probe_growth_max", max(growth) if growth else math.nan, lo=a - 0.05, hi=a + 0.05),
        Check("C1_probe_max_du_over_sigma", report.metrics["C1_probe_max_du_over_sigma"], hi=10.0),
    ]


def _run_B_noise_on_r(cfg, report, out):
    rows = _seed_table(cfg, _train_seeds(cfg, out), out)
    _training_common(cfg, report, out, rows)
    n_flag = _near(rows, cfg.problem.a, LEARNED_CANCEL_TOL)
    report.metrics["cancellations_near_a"] = n_flag
    report.checks[4] = [Check("cancellations_near_a", n_flag, lo=math.ceil(0.75 * len(rows)))]


REMARK_POLE = 0.9935


def _run_B_regularized(cfg, report, out):
    rows = _train_seeds(cfg, out)
    for r in rows:
        pol = policy_from_dict(r["policy"])
        r["zero"], r["pole"], r["gain"] = pol.zeros[0], pol.poles[0], pol.K
    rows = _seed_table(cfg, rows, out, ("gain", "zero", "pole"))
    med, pol = _training_common(cfg, report, out, rows)
    mz = float(np.median([r["zero"] for r in rows]))
    mp = float(np.median([r["pole"] for r in rows]))
    _stats(report, "zero", [r["zero"] for r in rows])
    _stats(report, "pole", [r["pole"] for r in rows])
    _stats(report, "gain", [r["gain"] for r in rows])
    canc = [c for c in report.audit.cancellations if c.unstable]
    report.metrics["median_seed_unstable_cancellation"] = float(bool(canc))
    report.metrics["median_seed_internally_stable"] = float(report.audit.internally_stable)
    report.checks[5] = [Check("median_zero", mz, cfg.problem.a - 0.02, cfg.problem.a + 0.02),
                        Check("median_pole", mp, REMARK_POLE - 0.01, REMARK_POLE + 0.01),
                        Check("median_seed_unstable_cancellation", float(bool(canc)), lo=1.0),
                        Check("median_seed_internally_stable", float(report.audit.internally_stable), hi=0.0)]


def _best_start(rows):
    return min(rows, key=lambda r: (r["train_loss"], r["seed"]))


def _per_pulse(cfg, report, out, plant, pol, name):
    """||e||_2 / (|r0| sqrt 2) for every training pulse, written to a CSV."""
    ratios = []
    table = []
    for pulse in cfg.loss.training_pulses:
        sim = simulate_loop(plant, pol, make_pulse(pulse, cfg.loss.horizon), NoiseSpec(), cfg.loss.horizon)
        c = l2_truncated(sim.e) if not sim.diverged else math.inf
        ratios.append(c / (abs(pulse.r0) * math.sqrt(2)))
        table.append([pulse.r0, pulse.n, c, ratios[-1]])
    _write_rows(out / f"{name}_per_pulse.csv", ["r0", "n", "error_norm", "ratio_to_r0_sqrt2"], table)
    return ratios


def _run_C_neural(cfg, report, out):
    rows = _train_seeds(cfg, out)
    _write_rows(out / "seeds.csv", ["seed", "train_loss", "nominal_cost"],
                [[r["seed"], r["train_loss"], r["nominal_cost"]] for r in rows])
    best = _best_start(rows)
    pol = policy_from_dict(best["policy"])
    (out / "selected_policy.json").write_text(json.dumps(pol.to_dict(), indent=2) + "\n")
    report.metrics["selected_seed"] = best["seed"]
    report.achieved_cost = best["nominal_cost"]
    sd = out / f"seed_{best['seed']:02d}"
    _artifact(report, "error_trace", sd / "timeseries.csv", f"selected start {best['seed']}")
    _artifact(report, "control_trace", sd / "timeseries.csv", f"selected start {best['seed']}")
    _artifact(report, "cost_history", sd / "cost_history.csv", f"selected start {best['seed']}")
    ratios = _per_pulse(cfg, report, out, cfg.plant, pol, "selected")
    pub = published_neural()
    pub_ratios = _per_pulse(cfg, report, out, cfg.plant, pub, "published")
    fwd = pub.forward([0.0, 0.0, 1.0])
    report.metrics.update(ratio_min=min(ratios), ratio_max=max(ratios), published_forward_001=fwd,
                          published_ratio_min=min(pub_ratios), published_ratio_max=max(pub_ratios))
    probes = _probe_runs(report, cfg, cfg.plant, pol, "at_control_u", out, "selected")
    div, _ = _probe_metrics(report, "selected_probe", probes, cfg.probe.scale)
    pub_probes = _probe_runs(report, cfg, cfg.plant, pub, "at_control_u", out, "published")
    _probe_metrics(report, "published_probe", pub_probes, cfg.probe.scale)
    report.audit = AuditVerdict(not div, None, [], ["T_ew", "T_uw"] if div else [], "empirical", probes)
    report.checks[6] = [Check("ratio_min", min(ratios), lo=0.95), Check("ratio_max", max(ratios), hi=1.05),
                        Check("published_forward_001", fwd, 0.995, 1.005),
                        Check("probe_diverged_fraction", len(div) / len(probes), lo=0.5 + 1e-12)]


def _run_mitigate_noise_training(cfg, report, out):
    rows = _seed_table(cfg, _train_seeds(cfg, out), out)
    med, pol = _training_common(cfg, report, out, rows)
    p = cfg.problem
    deg = report.achieved_cost / p.optimal_cost - 1.0
    report.metrics["degradation_vs_optimal"] = deg
    report.metrics["degradation_vs_super_optimal"] = report.achieved_cost / (abs(p.r0) * math.sqrt(2)) - 1.0
    _reference_runs(cfg, report, out, [("optimal", closed_form_optimum(p).C),
                                       ("C1", RationalTF([1.0, -p.a], [1.0, -1.0]))])
    _artifact(report, "comparison", out / f"seed_{med['seed']:02d}" / "timeseries.csv", "noise-trained (median)")
    stable = report.metrics["internally_stable_seeds"]
    report.checks[7] = [Check("internally_stable_seeds", stable, lo=math.ceil(0.9 * len(rows))),
                        Check("degradation_vs_optimal", deg, 0.10, 0.40)]


def _run_mitigate_prestabilize(cfg, report, out):
    C_ps = prestabilize(cfg.plant, cfg.policy.prestabilizer, cfg.optimizer)
    pub = published_prestabilizer()
    report.metrics["prestabilizer_gain"] = float(C_ps.to_vector()[0]) if C_ps.kind == "StaticGain" else math.nan
    pos, neg = pub.slopes()
    report.metrics.update(published_prestabilizer_slope_pos=pos, published_prestabilizer_slope_neg=neg)
    (out / "prestabilizer.json").write_text(json.dumps(C_ps.to_dict(), indent=2) + "\n")
    cfg = replace(cfg, prestabilizer_policy=C_ps.to_dict())
    rows = _train_seeds(cfg, out)
    _write_rows(out / "seeds.csv", ["seed", "train_loss", "nominal_cost"],
                [[r["seed"], r["train_loss"], r["nominal_cost"]] for r in rows])
    best = _best_start(rows)
    pol = policy_from_dict(best["policy"])
    (out / "selected_policy.json").write_text(json.dumps(pol.to_dict(), indent=2) + "\n")
    report.metrics["selected_seed"] = best["seed"]
    report.achieved_cost = best["nominal_cost"]
    sd = out / f"seed_{best['seed']:02d}"
    for kind in ("error_trace", "control_trace"):
        _artifact(report, kind, sd / "timeseries.csv", f"composite, start {best['seed']}")
    _artifact(report, "cost_history", sd / "cost_history.csv", f"composite, start {best['seed']}")
    _reference_runs(cfg, report, out, [("optimal", closed_form_optimum(cfg.problem).C)])
    _artifact(report, "comparison", sd / "timeseries.csv", "composite")
    specs = [cfg.probe.spec(s, inj) for s in cfg.probe.seeds for inj in ("at_control_u", "at_reference_r")]
    report.audit = audit_policy(cfg.plant, pol, specs, cfg.probe.horizon, cfg.probe.cap)
    long = _probe_runs(report, cfg, cfg.plant, pol, "at_control_u", out, "composite", cfg.probe.bounded_horizon)
    long_div = sum(p.diverged for p in long)
    growth = ensemble_growth(cfg.plant, pol, cfg.probe.spec(cfg.probe.seeds[0], "at_control_u"), "y",
                             cfg.probe.bounded_horizon, cfg.probe.growth_seeds, cap=cfg.probe.cap)
    ratio = report.achieved_cost / cfg.problem.optimal_cost
    report.metrics.update(cost_ratio_to_optimal=ratio, long_probe_divergences=long_div,
                          long_probe_max_y=max(p.max_y for p in long), y_ensemble_growth=growth)
    report.checks[8] = [Check("audit_internally_stable", float(report.audit.internally_stable), lo=1.0),
                        Check("cost_ratio_to_optimal", ratio, 0.85, 1.15),
                        Check("long_probe_divergences", long_div, hi=0),
                        Check("y_ensemble_growth", growth, hi=cfg.probe.bounded_ratio)]


def _run_nonmin_phase_placement(cfg, report, out):
    C = cfg.reference_controller
    report.audit = internal_stability(cfg.plant, C)
    pc = cfg.probe
    ratios = {}
    for inj in ("at_reference_r", "at_control_u"):
        spec = pc.spec(pc.seeds[0], inj)
        ratios[inj] = ensemble_growth(cfg.plant, C, spec, "u", pc.growth_horizon, pc.growth_seeds, cap=pc.cap)
        sim = simulate_loop(cfg.plant, C, make_pulse(PulseSpec(cfg.problem.r0, cfg.problem.n), pc.growth_horizon),
                            spec, pc.growth_horizon, pc.cap)
        path = out / f"reference_controller_{inj}.csv"
        sim.to_csv(path)
        _artifact(report, "control_trace", path, f"C, binary probe {inj}")
        _artifact(report, "comparison", path, f"probe {inj}")
        report.probes.append({"policy": "reference", "injection": inj, "kind": spec.kind, "scale": spec.scale,
                              "seed": spec.seed, "u_ensemble_growth": _num(ratios[inj]),
                              "max_u": float(np.max(np.abs(sim.u.samples))), "csv": str(path.relative_to(out))})
    _write_rows(out / "growth.csv", ["injection", "u_ensemble_growth"], [[k, v] for k, v in ratios.items()])
    report.metrics["u_growth_reference_probe"] = ratios["at_reference_r"]
    report.metrics["u_growth_control_probe"] = ratios["at_control_u"]
    # trained controllers are reported only
    if cfg.seeds:
        rows = _train_seeds(cfg, out)
        for r in rows:
            Ct = policy_from_dict(r["policy"]).transfer_function()
            r["u_growth_r"] = ensemble_growth(cfg.plant, Ct, pc.spec(pc.seeds[0], "at_reference_r"), "u",
                                              pc.growth_horizon, pc.growth_seeds, cap=pc.cap)
            r["u_growth_u"] = ensemble_growth(cfg.plant, Ct, pc.spec(pc.seeds[0], "at_control_u"), "u",
                                              pc.growth_horizon, pc.growth_seeds, cap=pc.cap)
        rows = _seed_table(cfg, rows, out, ("u_growth_r", "u_growth_u"))
        best = _best_start(rows)
        report.metrics["trained_selected_seed"] = best["seed"]
        report.metrics["trained_selected_unstable_cancellation"] = float(bool(best["unstable_cancellation"]))
        report.metrics["trained_internally_stable_seeds"] = sum(bool(r["internally_stable"]) for r in rows)
        report.achieved_cost = best["nominal_cost"]
        _artifact(report, "cost_history", out / f"seed_{best['seed']:02d}" / "cost_history.csv",
                  f"trained, seed {best['seed']}")
    report.checks[9] = [Check("u_growth_reference_probe", ratios["at_reference_r"], lo=pc.unbounded_ratio),
                        Check("u_growth_control_probe", ratios["at_control_u"], hi=pc.bounded_ratio)]


_RUNNERS = {
    "A_closed_form": _run_A_closed_form,
    "A_fir_search": _run_A_fir_search,
    "B_direct": _run_B_direct,
    "B_noise_on_r": _run_B_noise_on_r,
    "B_regularized": _run_B_regularized,
    "C_neural": _run_C_neural,
    "mitigate_noise_training": _run_mitigate_noise_training,
    "mitigate_prestabilize": _run_mitigate_prestabilize,
    "nonmin_phase_placement": _run_nonmin_phase_placement,
}


def _write_metrics(report: ExperimentReport, out: Path):
    rows = [[k, v] for k, v in sorted(report.metrics.items())]
    for k, checks in sorted(report.checks.items()):
        rows.extend([[f"criterion_{k}.{c.name}", c.value] for c in checks])
    rows = [[k, float(v) if isinstance(v, (int, float, np.floating, np.integer, bool)) else v] for k, v in rows]
    _write_rows(out / "metrics.csv", ["name", "value"], rows)


def run_scenario(cfg: ScenarioConfig) -> ExperimentReport:
    """Synthesize or train, audit, probe and export one scenario.

    Module errors are caught and recorded as diagnostics, which fail every
    criterion of the scenario.
    """
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    report = ExperimentReport(cfg.scenario, output_dir=str(out))
    if cfg.scenario not in ("nonmin_phase_placement",):
        _references(report, cfg.problem)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.scenario](cfg, report, out)
    except LabError as exc:
        report.diagnostics.append(f"{type(exc).__name__}: {exc}")
    report.runtime_s = time.perf_counter() - t0
    _write_metrics(report, out)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    if cfg.plots and not report.diagnostics:
        from .plots import emit_plots
        for kind in ("error_trace", "control_trace", "cost_history", "comparison"):
            if report.artifacts.get(kind):
                path = emit_plots(str(out), kind)
                report.artifacts.setdefault("plots", []).append({"label": kind, "path": str(Path(path).relative_to(out))})
        (out / "summary.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report


def run_scenarios(cfgs: List[ScenarioConfig], workers: int = 1) -> List[ExperimentReport]:
    """Run several scenarios, optionally in a process pool; merge is sequential."""
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run_scenario, cfgs))
    return [run_scenario(c) for c in cfgs]
