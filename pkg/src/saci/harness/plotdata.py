"""Plot-data export: align metric curves across seeds and render figures.

The report path writes a delimited table (step, mean, std) and a matching
PNG next to it.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..errors import UsageError
from .metrics import load_metrics


def _series(path, value_column):
    rows = load_metrics(path)
    if not rows:
        raise UsageError(f"metrics file {path} is empty")
    steps = np.array([r["step"] for r in rows], dtype=float)
    values = np.array([r[value_column] for r in rows], dtype=float)
    return steps, values


def _smooth(values, window):
    if window <= 1:
        return values
    kernel = np.ones(window) / window
    padded = np.concatenate([np.full(window - 1, values[0]), values])
    return np.convolve(padded, kernel, mode="valid")


def align_series(series):
    """Common step grid across runs: the coarsest grid over the overlap.

    Series on other grids are linearly interpolated onto it.
    """
    lo = max(s[0][0] for s in series)
    hi = min(s[0][-1] for s in series)
    if hi < lo:
        raise UsageError("metric files have no overlapping step range")
    candidates = []
    for steps, _ in series:
        inside = steps[(steps >= lo) & (steps <= hi)]
        candidates.append(inside)
    grid = min(candidates, key=len)
    if len(grid) == 0:
        grid = np.array([lo])
    stacked = np.stack([np.interp(grid, steps, values)
                        for steps, values in series])
    return grid, stacked


def export_plot_data(metrics_files, out_base: str, smoothing: int = 1,
                     value_column: str = "avg100", label: str = ""):
    """Aggregate one group of runs into (step, mean, std) and a figure.

    Writes {out_base}.csv and {out_base}.png; returns (grid, mean, std).
    """
    if not metrics_files:
        raise UsageError("export needs at least one metrics file")
    series = [_series(p, value_column) for p in metrics_files]
    grid, stacked = align_series(series)
    stacked = np.stack([_smooth(row, smoothing) for row in stacked])
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)

    csv_path = out_base + ".csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mean", "std"])
        for s, m, d in zip(grid, mean, std):
            writer.writerow([int(s), repr(float(m)), repr(float(d))])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(grid, mean, label=label or value_column)
    ax.fill_between(grid, mean - std, mean + std, alpha=0.25)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(value_column)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_base + ".png", dpi=130)
    plt.close(fig)
    return grid, mean, std


def render_comparison(groups: dict, out_base: str, smoothing: int = 1,
                      value_column: str = "avg100"):
    """Multi-line figure: one mean curve (with std band) per labeled group
    of metrics files; table columns step, {label}_mean, {label}_std."""
    if not groups:
        raise UsageError("nothing to plot")
    aggregated = {}
    for label, files in groups.items():
        series = [_series(p, value_column) for p in files]
        grid, stacked = align_series(series)
        stacked = np.stack([_smooth(row, smoothing) for row in stacked])
        aggregated[label] = (grid, stacked.mean(axis=0), stacked.std(axis=0))

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (grid, mean, std) in aggregated.items():
        ax.plot(grid, mean, label=label)
        ax.fill_between(grid, mean - std, mean + std, alpha=0.2)
    ax.set_xlabel("environment steps")
    ax.set_ylabel(value_column)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_base + ".png", dpi=130)
    plt.close(fig)

    with open(out_base + ".csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["label", "step", "mean", "std"]
        writer.writerow(header)
        for label, (grid, mean, std) in aggregated.items():
            for s, m, d in zip(grid, mean, std):
                writer.writerow([label, int(s), repr(float(m)), repr(float(d))])
    return aggregated
