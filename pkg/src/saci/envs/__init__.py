"""Desk-scale continuous-control environments.

Three deterministic tasks mirror the stop-signal experimental structure: a
1-D stop-go toy, a simplified lander with a mid-episode bomb, and a 1-D
hopper with obstacle blocks, gaps, and stuck/fall semantics.  Dynamics are
plain float arithmetic; randomness only enters through each environment's
seeded generator at reset (trial kind, layouts, start perturbations).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError

CAUSE_RUNNING = "running"
CAUSE_LANDED = "landed"
CAUSE_CRASHED = "crashed"
CAUSE_HIT_BOMB = "hit_bomb"
CAUSE_FELL = "fell"
CAUSE_FINISHED = "finished"
CAUSE_TIMEOUT = "timeout"

ALL_CAUSES = (CAUSE_LANDED, CAUSE_CRASHED, CAUSE_HIT_BOMB, CAUSE_FELL,
              CAUSE_FINISHED, CAUSE_TIMEOUT)

TRIAL_GO = "go"
TRIAL_STOP = "stop"

# observation slots for absent bomb/zone coordinates
DUMMY_OBS = -1.0


@dataclass
class EnvSpec:
    name: str
    obs_dim: int
    act_dim: int
    max_steps: int


@dataclass
class StepResult:
    """One environment step: observation, raw reward and its components,
    termination cause, and rule/shaping inputs in `info`."""

    obs: np.ndarray
    reward_raw: float
    reward_components: dict
    done: bool
    cause: str
    info: dict


def compose_reward(components: dict) -> float:
    """reward_raw is exactly the sum of its components."""
    return float(sum(components.values()))


def env_reset(env, seed_or_stream):
    """Re-seed the environment's stream and reset.

    Accepts an integer seed or a numpy Generator; identical streams give
    bit-identical initial observations.
    """
    if isinstance(seed_or_stream, np.random.Generator):
        env.rng = seed_or_stream
    else:
        env.rng = np.random.default_rng(seed_or_stream)
    return env.reset()


def write_episode_trace(path, records):
    """Export one episode as delimited text: one row per step.

    `records` is a sequence of (step_index, action, StepResult).
    """
    if not records:
        raise UsageError("cannot export an empty episode trace")
    _, first_action, first = records[0]
    comp_keys = sorted(first.reward_components)
    header = (["step"]
              + [f"obs{i}" for i in range(len(first.obs))]
              + [f"action{i}" for i in range(len(first_action))]
              + ["reward_raw"]
              + [f"component_{k}" for k in comp_keys]
              + ["done", "cause"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for step_idx, action, res in records:
            row = ([step_idx]
                   + [repr(float(v)) for v in res.obs]
                   + [repr(float(a)) for a in action]
                   + [repr(res.reward_raw)]
                   + [repr(float(res.reward_components[k])) for k in comp_keys]
                   + [int(res.done), res.cause])
            writer.writerow(row)


def make_env(name: str, rng: np.random.Generator, **kwargs):
    """Environment factory; `name` is one of stopgo, lander, runner."""
    from .lander import LanderBomb
    from .runner import RidgeRunner
    from .stopgo import StopGo1D

    table = {"stopgo": StopGo1D, "lander": LanderBomb, "runner": RidgeRunner}
    if name not in table:
        raise UsageError(f"unknown environment {name!r}; have {sorted(table)}")
    return table[name](rng, **kwargs)
