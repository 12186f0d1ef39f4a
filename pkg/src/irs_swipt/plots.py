"""Figure rendering for experiment result files.

Reads the CSV produced by the experiment runner and renders static
comparison figures next to it (or into a chosen directory). Kept separate
from the runner so result files stay the only simulation output; rendering
is re-runnable on any existing CSV.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only, no display server
import matplotlib.pyplot as plt
import numpy as np

_SOLVER_ORDER = ("penalty", "low_complexity", "alternating", "fixed_phase",
                 "no_irs", "separate_beams")
_LABELS = {
    "penalty": "joint (penalty)",
    "low_complexity": "per-panel + beams",
    "alternating": "alternating",
    "fixed_phase": "fixed phases",
    "no_irs": "no IRS",
    "separate_beams": "separate beams",
}
_MARKERS = {"penalty": "o", "low_complexity": "s", "alternating": "^",
            "fixed_phase": "v", "no_irs": "x", "separate_beams": "d"}


def _read_rows(csv_path: Path) -> list[dict]:
    with open(csv_path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _sweep_axis(rows: list[dict]) -> list[float]:
    return sorted({float(r["sweep_value"]) for r in rows})


def _by_solver(rows: list[dict]) -> dict[str, list[dict]]:
    groups = defaultdict(list)
    for r in rows:
        groups[r["solver"]].append(r)
    order = {name: i for i, name in enumerate(_SOLVER_ORDER)}
    return dict(sorted(groups.items(), key=lambda kv: order.get(kv[0], 99)))


def _series(group: list[dict], axis: list[float], column: str, reducer):
    out = []
    for v in axis:
        vals = [float(r[column]) for r in group
                if float(r["sweep_value"]) == v and r[column] != "-inf"]
        out.append(reducer(vals) if vals else np.nan)
    return out


def _new_axes(xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.35)
    return fig, ax


def render_report(csv_path, out_dir=None, fmt: str = "png",
                  xlabel: str = "sweep value") -> list[Path]:
    """Render the standard comparison figures for one result file."""
    csv_path = Path(csv_path)
    out = Path(out_dir) if out_dir is not None else csv_path.parent
    out.mkdir(parents=True, exist_ok=True)
    rows = _read_rows(csv_path)
    if not rows:
        raise ValueError(f"no result rows in {csv_path}")
    axis = _sweep_axis(rows)
    groups = _by_solver(rows)
    stem = csv_path.stem
    written = []

    fig, ax = _new_axes(xlabel, "median transmit power [dBm]")
    for name, group in groups.items():
        med_w = _series(group, axis, "power_w", np.median)
        med_dbm = [10.0 * np.log10(p * 1e3) if p and p > 0 else np.nan
                   for p in med_w]
        ax.plot(axis, med_dbm, marker=_MARKERS.get(name, "o"),
                label=_LABELS.get(name, name))
    ax.legend()
    path = out / f"{stem}_power.{fmt}"
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = _new_axes(xlabel, "feasible fraction")
    for name, group in groups.items():
        rate = []
        for v in axis:
            flags = [r["feasible"] == "True" for r in group
                     if float(r["sweep_value"]) == v]
            rate.append(float(np.mean(flags)) if flags else np.nan)
        ax.plot(axis, rate, marker=_MARKERS.get(name, "o"),
                label=_LABELS.get(name, name))
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    path = out / f"{stem}_feasibility.{fmt}"
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = _new_axes(xlabel, "median active energy beams")
    for name, group in groups.items():
        ax.plot(axis, _series(group, axis, "energy_beam_count", np.median),
                marker=_MARKERS.get(name, "o"), label=_LABELS.get(name, name))
    ax.legend()
    path = out / f"{stem}_energy_beams.{fmt}"
    fig.savefig(path, bbox_inches="tight", dpi=150)
    plt.close(fig)
    written.append(path)
    return written
