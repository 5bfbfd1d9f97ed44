"""``lab`` command-line entry point.

Exit codes: 0 when every criterion passes (or the audit finds the loop
internally stable), 1 on a criterion failure, 2 on a configuration or input
error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, LabError, MissingArtifact

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _cmd_list(args) -> int:
    from .experiments import list_scenarios
    cat = list_scenarios()
    width = max(len(k) for k in cat)
    for sid, info in cat.items():
        crit = ",".join(str(c) for c in info.criteria)
        print(f"{sid:<{width}}  criteria {crit:<3}  {info.title}: {info.anchor}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .experiments import validate_config
    diags = validate_config(args.config)
    for d in diags:
        print(f"{args.config}: {d}", file=sys.stderr)
    if not diags:
        print(f"{args.config}: ok")
    return EXIT_CONFIG if diags else EXIT_OK


def _cmd_run(args) -> int:
    from dataclasses import replace

    from .experiments import load_config, run_scenarios
    cfgs = []
    for path in args.config:
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            for d in getattr(exc, "diagnostics", [exc]):
                print(f"{path}: {d}", file=sys.stderr)
            return EXIT_CONFIG
        if args.plots:
            cfg = replace(cfg, plots=True)
        if args.seed_workers:
            cfg = replace(cfg, workers=args.seed_workers)
        cfgs.append(cfg)
    reports = run_scenarios(cfgs, args.workers)
    for rep in reports:
        for line in rep.summary_lines():
            print(line)
        print(f"  report: {Path(rep.output_dir) / 'summary.json'}  ({rep.runtime_s:.1f} s)")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _load_controller(text: str):
    from .policies import policy_from_json
    from .tf import tf_from_text
    p = Path(text)
    if p.suffix == ".json" or p.is_file():
        if not p.is_file():
            raise ConfigError(f"no controller file {p}", "controller")
        return policy_from_json(p.read_text())
    return tf_from_text(text)


def _cmd_audit(args) -> int:
    from .audit import audit_policy, default_probes
    from .tf import tf_from_text
    try:
        plant = tf_from_text(args.plant)
        ctrl = _load_controller(args.controller)
    except (ValueError, KeyError, json.JSONDecodeError, LabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    probes = default_probes(args.probe_seed, args.probe_sigma) if args.probe_sigma > 0 else None
    try:
        verdict = audit_policy(plant, ctrl, probes, args.horizon)
    except LabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(verdict.to_json() if args.json else verdict.table())
    return EXIT_OK if verdict.internally_stable else EXIT_FAIL


def _cmd_plot(args) -> int:
    from .plots import PLOT_KINDS, emit_plots
    kinds = PLOT_KINDS if args.kind == "all" else (args.kind,)
    try:
        for k in kinds:
            print(emit_plots(args.report, k, args.out if len(kinds) == 1 else None))
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="Direct policy search and internal-stability experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one or more scenario configs")
    p.add_argument("config", nargs="+")
    p.add_argument("--workers", type=int, default=1, help="scenarios run in parallel")
    p.add_argument("--seed-workers", type=int, default=0, help="override the per-scenario seed pool size")
    p.add_argument("--plots", action="store_true", help="also render SVG plots")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("list", help="list the scenario catalog")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("audit", help="internal-stability audit of a plant/controller pair")
    p.add_argument("--plant", required=True, help='transfer function "num | den", descending powers of z')
    p.add_argument("--controller", required=True, help='transfer function "num | den" or a policy JSON file')
    p.add_argument("--probe-sigma", type=float, default=0.1, help="gaussian probe sigma (0 disables probes)")
    p.add_argument("--probe-seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--json", action="store_true", help="print the verdict as JSON")
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("plot", help="render SVG plots from a report")
    p.add_argument("report", help="report directory or summary.json")
    p.add_argument("--kind", required=True, choices=("error_trace", "control_trace", "cost_history", "comparison",
                                                      "all"))
    p.add_argument("--out", default=None, help="output SVG path (single kind only)")
    p.set_defaults(func=_cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
