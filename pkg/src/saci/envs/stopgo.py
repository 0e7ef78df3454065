"""1-D stop-signal toy: drive a point mass to the goal; on stop trials a
forbidden zone appears mid-track and later clears."""

from __future__ import annotations

import numpy as np

from ..errors import UsageError
from . import (
    CAUSE_FINISHED,
    CAUSE_HIT_BOMB,
    CAUSE_RUNNING,
    CAUSE_TIMEOUT,
    DUMMY_OBS,
    EnvSpec,
    StepResult,
    TRIAL_GO,
    TRIAL_STOP,
    compose_reward,
)
from .shaping import bomb_proxy_shaping

DT = 0.1
V_MAX = 0.8
A_MAX = 1.5
X_MIN, X_MAX = -1.5, 1.5
GOAL_X = 1.0
GOAL_REWARD = 100.0
TIME_PENALTY = -0.1
ZONE_PENALTY = -150.0
ZONE_HALF_WIDTH = 0.08
ZONE_TRIGGER_X = 0.0
ZONE_DURATION = 60


class StopGo1D:
    """Point mass on a line; observation [x, v, zone_left, zone_right]."""

    def __init__(self, rng: np.random.Generator, bomb_freq: float = 0.5,
                 max_steps: int = 1000):
        self.rng = rng
        self.bomb_freq = bomb_freq
        self.spec = EnvSpec("stopgo", 4, 1, max_steps)
        self._done = True

    def reset(self) -> np.ndarray:
        self.x = -1.0 + float(self.rng.uniform(-0.05, 0.05))
        self.v = 0.0
        self.t = 0
        self.trial = TRIAL_STOP if self.rng.random() < self.bomb_freq else TRIAL_GO
        # zone position is drawn up front; it is revealed only on trigger
        self.zone_center = float(self.rng.uniform(0.5, 0.65))
        self.zone_active = False
        self.zone_spent = False
        self.zone_steps_left = 0
        self._done = False
        return self._obs()

    def _obs(self) -> np.ndarray:
        if self.zone_active:
            zl = self.zone_center - ZONE_HALF_WIDTH
            zr = self.zone_center + ZONE_HALF_WIDTH
        else:
            zl = zr = DUMMY_OBS
        return np.array([self.x, self.v, zl, zr])

    def _info(self) -> dict:
        d = abs(self.x - self.zone_center)
        return {
            "bomb_present": self.zone_active,
            "bomb_center": (self.zone_center, 0.0) if self.zone_active else None,
            "bomb_distance": d if self.zone_active else None,
            "shaping_proxy": bomb_proxy_shaping(d) if self.zone_active else 0.0,
            "shaping_conservative": 0.0,
            "stuck_flag": False,
            "trial_kind": self.trial,
        }

    def step(self, action) -> StepResult:
        if self._done:
            raise UsageError("step() after episode end; call reset()")
        a = float(np.clip(action[0], -1.0, 1.0))
        self.v = float(np.clip(self.v + a * A_MAX * DT, -V_MAX, V_MAX))
        self.x += self.v * DT
        if self.x < X_MIN:
            self.x, self.v = X_MIN, 0.0
        if self.x > X_MAX:
            self.x, self.v = X_MAX, 0.0
        self.t += 1

        if (self.trial == TRIAL_STOP and not self.zone_spent
                and not self.zone_active and self.x >= ZONE_TRIGGER_X):
            self.zone_active = True
            self.zone_steps_left = ZONE_DURATION
        elif self.zone_active:
            self.zone_steps_left -= 1
            if self.zone_steps_left <= 0:
                self.zone_active = False
                self.zone_spent = True

        components = {"base": 0.0, "time_penalty": TIME_PENALTY,
                      "bomb_penalty": 0.0}
        cause = CAUSE_RUNNING
        done = False
        in_zone = (self.zone_active
                   and abs(self.x - self.zone_center) <= ZONE_HALF_WIDTH)
        if in_zone:
            components["bomb_penalty"] = ZONE_PENALTY
            cause, done = CAUSE_HIT_BOMB, True
        elif self.x >= GOAL_X:
            components["base"] = GOAL_REWARD
            cause, done = CAUSE_FINISHED, True
        elif self.t >= self.spec.max_steps:
            cause, done = CAUSE_TIMEOUT, True
        self._done = done
        return StepResult(self._obs(), compose_reward(components), components,
                          done, cause, self._info())
