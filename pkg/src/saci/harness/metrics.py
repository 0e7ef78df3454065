"""Per-episode training metrics as delimited text.

One row per episode; floats are written with repr so identical runs produce
byte-identical files and values round-trip exactly.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass

from ..envs import ALL_CAUSES

METRIC_COLUMNS = [
    "episode", "step", "trial_kind", "episode_steps", "episode_reward_raw",
    "avg100", "alpha_r", "alpha_i",
    "loss_q_r", "loss_q_i", "loss_pi", "loss_alpha_r", "loss_alpha_i",
    "fill_r", "fill_i", "cause",
] + [f"n_{c}" for c in ALL_CAUSES]


@dataclass
class MetricsRecord:
    episode: int
    step: int
    trial_kind: str
    episode_steps: int
    episode_reward_raw: float
    avg100: float
    alpha_r: float
    alpha_i: float
    loss_q_r: float
    loss_q_i: float
    loss_pi: float
    loss_alpha_r: float
    loss_alpha_i: float
    fill_r: int
    fill_i: int
    cause: str
    cause_counts: dict

    def row(self) -> list:
        return ([self.episode, self.step, self.trial_kind, self.episode_steps,
                 repr(self.episode_reward_raw), repr(self.avg100),
                 repr(self.alpha_r), repr(self.alpha_i),
                 repr(self.loss_q_r), repr(self.loss_q_i), repr(self.loss_pi),
                 repr(self.loss_alpha_r), repr(self.loss_alpha_i),
                 self.fill_r, self.fill_i, self.cause]
                + [self.cause_counts.get(c, 0) for c in ALL_CAUSES])


class MetricsWriter:
    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRIC_COLUMNS)

    def write(self, record: MetricsRecord):
        self._writer.writerow(record.row())
        self._fh.flush()

    def close(self):
        self._fh.close()


class Avg100:
    """Mean raw episode reward over the last 100 episodes (or what exists)."""

    def __init__(self):
        self._window = deque(maxlen=100)

    def push(self, value: float) -> float:
        self._window.append(value)
        return self.value

    @property
    def value(self) -> float:
        if not self._window:
            return math.nan
        return sum(self._window) / len(self._window)


class MeanAccumulator:
    """NaN-ignoring running mean of per-update losses within an episode."""

    def __init__(self):
        self.total = 0.0
        self.count = 0

    def push(self, value):
        if value is not None and not math.isnan(value):
            self.total += value
            self.count += 1

    @property
    def value(self) -> float:
        return self.total / self.count if self.count else math.nan


def load_metrics(path) -> list:
    """Rows as dicts with numeric fields parsed back to int/float."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, value in row.items():
                if key in ("trial_kind", "cause"):
                    parsed[key] = value
                elif key in ("episode", "step", "episode_steps", "fill_r",
                             "fill_i") or key.startswith("n_"):
                    parsed[key] = int(value)
                else:
                    parsed[key] = float(value)
            out.append(parsed)
    return out
