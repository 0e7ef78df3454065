"""Multi-seed sweeps over config axes, with aggregated exports."""

from __future__ import annotations

import csv
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .config import TrainConfig
from .metrics import load_metrics
from .train import RunResult, run_training


@dataclass
class SweepCell:
    coords: dict
    seed: int
    result: RunResult

    @property
    def name(self) -> str:
        parts = [f"{k}={v}" for k, v in self.coords.items()]
        return "_".join(parts + [f"seed{self.seed}"])


def cell_name(coords: dict, seed: int) -> str:
    return "_".join([f"{k}={v}" for k, v in coords.items()] + [f"seed{seed}"])


def _run_cell(cfg: TrainConfig) -> RunResult:
    return run_training(cfg)


def sweep(template: TrainConfig, axis: dict, seeds: int, out_dir: str,
          workers: int = 1) -> list:
    """Run every axis combination for `seeds` master seeds.

    `axis` maps config field names to value lists; cells are the cartesian
    product.  Returns SweepCells and writes summary.csv (one row per cell:
    coordinates, seed, final avg100) plus matrix.csv aggregating mean and
    std of the final avg100 across seeds per coordinate.
    """
    os.makedirs(out_dir, exist_ok=True)
    names = list(axis)
    configs = []
    for values in itertools.product(*(axis[n] for n in names)):
        coords = dict(zip(names, values))
        for k in range(seeds):
            cfg = replace(template, seed=template.seed + k,
                          out_dir=os.path.join(out_dir, cell_name(coords, template.seed + k)),
                          **coords)
            configs.append((coords, cfg))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, [c for _, c in configs]))
    else:
        results = [_run_cell(c) for _, c in configs]
    cells = [SweepCell(coords, cfg.seed, res)
             for (coords, cfg), res in zip(configs, results)]

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["seed", "episodes", "steps", "final_avg100",
                                 "metrics_path"])
        for cell in cells:
            writer.writerow([cell.coords[n] for n in names]
                            + [cell.seed, cell.result.episodes,
                               cell.result.steps,
                               repr(cell.result.final_avg100),
                               cell.result.metrics_path])

    with open(os.path.join(out_dir, "matrix.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["seeds", "mean_final_avg100",
                                 "std_final_avg100"])
        for coords in _unique_coords(cells, names):
            finals = [c.result.final_avg100 for c in cells
                      if all(c.coords[n] == coords[n] for n in names)]
            writer.writerow([coords[n] for n in names]
                            + [len(finals), repr(float(np.mean(finals))),
                               repr(float(np.std(finals)))])
    return cells


def _unique_coords(cells, names):
    seen = []
    for cell in cells:
        coords = {n: cell.coords[n] for n in names}
        if coords not in seen:
            seen.append(coords)
    return seen


def load_cell_metrics(out_dir: str, coords: dict, seed: int) -> list:
    """Parse back one cell's metrics file by its coordinates."""
    return load_metrics(os.path.join(out_dir, cell_name(coords, seed),
                                     "metrics.csv"))
