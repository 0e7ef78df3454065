"""Simplified lander with a mid-episode bomb.

Point-mass craft under gravity with a throttled main engine and a lateral
engine that both rotates and translates.  On stop trials a square bomb zone
appears near the pad once the craft descends past the trigger altitude; its
coordinates enter the observation only from that moment.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import UsageError
from . import (
    CAUSE_CRASHED,
    CAUSE_HIT_BOMB,
    CAUSE_LANDED,
    CAUSE_RUNNING,
    CAUSE_TIMEOUT,
    DUMMY_OBS,
    EnvSpec,
    StepResult,
    TRIAL_GO,
    TRIAL_STOP,
    compose_reward,
)
from .shaping import bomb_proxy_shaping, conservative_shaping

DT = 0.04
GRAVITY = 1.0
MAIN_ACCEL = 2.4
SIDE_ACCEL = 0.3
SIDE_TORQUE = 2.5
ANGLE_DAMPING = 0.88
X_LIMIT = 1.0
Y_START = 1.3
Y_CEILING = 1.4
PAD_HALF_WIDTH = 0.4
LAND_VX, LAND_VY, LAND_ANGLE = 0.6, 0.65, 0.5
LAND_REWARD = 100.0
LEG_REWARD = 10.0
CRASH_PENALTY = -100.0
BOMB_PENALTY = -150.0
TIME_PENALTY = -0.1
MAIN_COST = -0.3
SIDE_COST = -0.03
BOMB_TRIGGER_Y = 1.1
BOMB_HALF_WIDTH = 0.1

# potential-based progress shaping; coefficients calibrated so a nominal
# descent accrues ~120 points, inside the 100-140 band
PHI_DIST = 100.0
PHI_SPEED = 40.0
PHI_ANGLE = 30.0


class LanderBomb:
    """Observation: 8 craft states plus bomb-zone corners (or -1 dummies)."""

    def __init__(self, rng: np.random.Generator, bomb_freq: float = 0.5,
                 max_steps: int = 1000):
        self.rng = rng
        self.bomb_freq = bomb_freq
        self.spec = EnvSpec("lander", 12, 2, max_steps)
        self._done = True

    def reset(self) -> np.ndarray:
        self.x = float(self.rng.uniform(-0.15, 0.15))
        self.y = Y_START
        self.vx = float(self.rng.uniform(-0.05, 0.05))
        self.vy = 0.0
        self.angle = float(self.rng.uniform(-0.05, 0.05))
        self.v_angle = 0.0
        self.legs = (0.0, 0.0)
        self.t = 0
        self.trial = TRIAL_STOP if self.rng.random() < self.bomb_freq else TRIAL_GO
        self.bomb_x = float(self.rng.uniform(-0.2, 0.2))
        self.bomb_y = float(self.rng.uniform(0.1, 0.5))
        self.bomb_present = False
        self._done = False
        return self._obs()

    def _phi(self) -> float:
        dist = math.sqrt(self.x * self.x + self.y * self.y)
        speed = math.sqrt(self.vx * self.vx + self.vy * self.vy)
        return -PHI_DIST * dist - PHI_SPEED * speed - PHI_ANGLE * abs(self.angle)

    def _obs(self) -> np.ndarray:
        if self.bomb_present:
            zone = (self.bomb_x - BOMB_HALF_WIDTH, self.bomb_y + BOMB_HALF_WIDTH,
                    self.bomb_x + BOMB_HALF_WIDTH, self.bomb_y - BOMB_HALF_WIDTH)
        else:
            zone = (DUMMY_OBS,) * 4
        return np.array([self.x, self.y, self.vx, self.vy, self.angle,
                         self.v_angle, self.legs[0], self.legs[1], *zone])

    def _info(self) -> dict:
        if self.bomb_present:
            dx = abs(self.x - self.bomb_x)
            dy = abs(self.y - self.bomb_y)
            d_b = math.sqrt(dx * dx + dy * dy)
            proxy = bomb_proxy_shaping(d_b)
            conservative = conservative_shaping(
                self.x, self.y, self.vx, self.vy, self.angle, self.v_angle,
                self.bomb_x, self.bomb_y)
        else:
            dx = dy = d_b = None
            proxy = conservative = 0.0
        return {
            "bomb_present": self.bomb_present,
            "bomb_center": (self.bomb_x, self.bomb_y) if self.bomb_present else None,
            "bomb_distance": d_b,
            "bomb_dx": dx,
            "bomb_dy": dy,
            "shaping_proxy": proxy,
            "shaping_conservative": conservative,
            "stuck_flag": False,
            "trial_kind": self.trial,
        }

    def step(self, action) -> StepResult:
        if self._done:
            raise UsageError("step() after episode end; call reset()")
        a_main = float(np.clip(action[0], -1.0, 1.0))
        a_side = float(np.clip(action[1], -1.0, 1.0))
        throttle = max(a_main, 0.0)

        phi_before = self._phi()
        ax = -math.sin(self.angle) * MAIN_ACCEL * throttle + SIDE_ACCEL * a_side
        ay = math.cos(self.angle) * MAIN_ACCEL * throttle - GRAVITY
        self.vx += ax * DT
        self.vy += ay * DT
        self.x += self.vx * DT
        self.y += self.vy * DT
        self.v_angle = self.v_angle * ANGLE_DAMPING + SIDE_TORQUE * a_side * DT
        self.angle += self.v_angle * DT
        if self.y > Y_CEILING:
            self.y, self.vy = Y_CEILING, 0.0
        self.t += 1

        if (self.trial == TRIAL_STOP and not self.bomb_present
                and self.y <= BOMB_TRIGGER_Y):
            self.bomb_present = True

        components = {
            "base": MAIN_COST * throttle + SIDE_COST * abs(a_side)
                    + (self._phi() - phi_before),
            "time_penalty": TIME_PENALTY,
            "bomb_penalty": 0.0,
        }
        cause = CAUSE_RUNNING
        done = False

        hit_bomb = (self.bomb_present
                    and abs(self.x - self.bomb_x) <= BOMB_HALF_WIDTH
                    and abs(self.y - self.bomb_y) <= BOMB_HALF_WIDTH)
        if hit_bomb:
            components["bomb_penalty"] = BOMB_PENALTY
            cause, done = CAUSE_HIT_BOMB, True
        elif self.y <= 0.0:
            self.y = 0.0
            gentle = abs(self.vy) <= LAND_VY and abs(self.vx) <= LAND_VX
            upright = abs(self.angle) <= LAND_ANGLE
            if gentle and upright:
                self.legs = (1.0, 1.0)
                components["base"] += 2 * LEG_REWARD
            if gentle and upright and abs(self.x) <= PAD_HALF_WIDTH:
                components["base"] += LAND_REWARD
                cause, done = CAUSE_LANDED, True
            else:
                components["base"] += CRASH_PENALTY
                cause, done = CAUSE_CRASHED, True
        elif abs(self.x) > X_LIMIT:
            components["base"] += CRASH_PENALTY
            cause, done = CAUSE_CRASHED, True
        elif self.t >= self.spec.max_steps:
            cause, done = CAUSE_TIMEOUT, True
        self._done = done
        return StepResult(self._obs(), compose_reward(components), components,
                          done, cause, self._info())
