"""SVG figures rendered from a scenario's exported CSVs."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import MissingArtifact  # noqa: E402

PLOT_KINDS = ("error_trace", "control_trace", "cost_history", "comparison")
_COLUMNS = {"error_trace": ("k", "e"), "control_trace": ("k", "u"), "cost_history": ("iter", "best_cost"),
            "comparison": ("k", "e")}
_YLABEL = {"error_trace": "tracking error e", "control_trace": "control u", "cost_history": "best cost",
           "comparison": "tracking error e"}


def read_series(path, xcol: str, ycol: str):
    """Two columns of a CSV as float lists; a missing file or empty series is an error."""
    p = Path(path)
    if not p.is_file():
        raise MissingArtifact(f"missing CSV {p}")
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise MissingArtifact(f"{p} holds no samples")
    if xcol not in rows[0] or ycol not in rows[0]:
        raise MissingArtifact(f"{p} lacks columns {xcol!r}/{ycol!r}")
    return [float(r[xcol]) for r in rows], [float(r[ycol]) for r in rows]


def _as_summary(report) -> dict:
    from .experiments import ExperimentReport, load_report
    if isinstance(report, ExperimentReport):
        d = report.to_dict()
        d["_dir"] = report.output_dir
        return d
    if isinstance(report, dict):
        return report
    return load_report(report)


def emit_plots(report, kind: str, path=None) -> str:
    """Render one plot kind for a report and return the SVG path.

    ``report`` is a report directory, a ``summary.json`` path, a loaded
    summary dict or an :class:`ExperimentReport`.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    d = _as_summary(report)
    base = Path(d.get("_dir", "."))
    entries = d.get("artifacts", {}).get(kind, [])
    if not entries:
        raise MissingArtifact(f"report for {d.get('scenario')} has no {kind} artifacts")
    xcol, ycol = _COLUMNS[kind]
    series = [(e["label"], *read_series(base / e["path"], xcol, ycol)) for e in entries]

    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for label, x, y in series:
        if kind == "cost_history":
            ax.semilogy(x, y, label=label)
        else:
            ax.step(x, y, where="post", label=label)
    ax.set_xlabel("iteration" if kind == "cost_history" else "sample k")
    ax.set_ylabel(_YLABEL[kind])
    ax.set_title(f"{d.get('scenario')}: {kind.replace('_', ' ')}")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    seeds = d.get("metrics", {}).get("median_seed", d.get("metrics", {}).get("selected_seed"))
    note = f"scenario {d.get('scenario')}" + (f", seed {int(seeds)}" if isinstance(seeds, (int, float)) else "")
    ax.annotate(note, xy=(0.01, 0.01), xycoords="figure fraction", fontsize=7, color="0.4")
    fig.tight_layout()
    out = Path(path) if path is not None else base / "plots" / f"{kind}.svg"
    out.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context({"svg.hashsalt": "dpslab"}):
        fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return str(out)
