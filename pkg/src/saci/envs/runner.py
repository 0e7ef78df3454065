"""1-D hopper on a track with obstacle blocks and gaps.

Grounded driving follows a damped velocity model; a knee impulse launches
hops (with a small forward kick) over blocks and across gaps.  Hard landings
without leg stiffness cause falls, touching ground inside a gap causes a
fall, and pushing against a block front zeroes forward progress, which the
trailing reward window reports as stuck.  Reward composition (fall penalty,
stuck term, modulated stuck weight) is configurable.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..errors import UsageError
from . import (
    CAUSE_FELL,
    CAUSE_FINISHED,
    CAUSE_RUNNING,
    CAUSE_TIMEOUT,
    EnvSpec,
    StepResult,
    TRIAL_GO,
    TRIAL_STOP,
    compose_reward,
)
from .shaping import stuck_reward

DT = 0.1
TRACK_LENGTH = 5.0
DRIVE_ACCEL = 1.2
FRICTION = 0.8
SPEED_LIMIT = 2.0
GRAVITY = 5.0
HOP_VELOCITY = 1.8
HOP_FORWARD = 1.0
HOP_THRESHOLD = 0.5
SAFE_IMPACT = 1.45
STIFFNESS_IMPACT_BONUS = 0.4
BLOCK_HEIGHT = 0.16
BLOCK_WIDTH = 0.12
BONK_REBOUND = 0.25
GAP_WIDTH = 0.3
PROGRESS_TOTAL = 300.0
LIVING_COST = -0.35
TORQUE_COST = -0.05
FALL_PENALTY = -100.0
BALANCE_GAIN = 2.0
BALANCE_RESTORE = 3.0
SENSOR_WINDOWS = ((0.0, 0.25), (0.25, 0.6), (0.6, 1.0), (1.0, 1.5))
STUCK_WINDOW = 6


class RidgeRunner:
    """Observation: 8 proprioceptive values + 4 forward terrain readings.

    Proprioception: [height, forward speed, vertical speed, pitch,
    sin/cos leg phase, ground contact, last stiffness].  Each terrain reading
    aggregates a forward window (block height positive, gap depth negative);
    everything is relative to the hull, no absolute track coordinate.
    """

    def __init__(self, rng: np.random.Generator, stop_prob: float = 0.5,
                 max_steps: int = 2000, include_fall_penalty: bool = True,
                 include_stuck_reward: bool = False, include_gaps: bool = False,
                 stuck_timeout: int = 0):
        self.rng = rng
        self.stop_prob = stop_prob
        self.include_fall_penalty = include_fall_penalty
        self.include_stuck_reward = include_stuck_reward
        self.include_gaps = include_gaps
        self.stuck_timeout = stuck_timeout
        self.spec = EnvSpec("runner", 12, 4, max_steps)
        self._done = True

    def reset(self) -> np.ndarray:
        self.x = 0.0
        self.v = 0.0
        self.h = 0.0
        self.vh = 0.0
        self.pitch = 0.0
        self.phase = 0.0
        self.last_stiffness = 0.0
        self.t = 0
        self.stuck_weight = 1.0
        self.trial = TRIAL_STOP if self.rng.random() < self.stop_prob else TRIAL_GO
        self.blocks = []
        self.gaps = []
        if self.trial == TRIAL_STOP:
            self.blocks = [float(self.rng.uniform(0.8, 1.1)),
                           float(self.rng.uniform(1.9, 2.3)),
                           float(self.rng.uniform(3.0, 3.4))]
            if self.include_gaps:
                g = float(self.rng.uniform(3.9, 4.2))
                self.gaps = [(g, g + GAP_WIDTH)]
        self._recent = deque([0.0] * STUCK_WINDOW, maxlen=STUCK_WINDOW)
        self._stuck_streak = 0
        self._done = False
        return self._obs()

    def set_stuck_weight(self, w: float):
        """Scale of the stuck component for the current step (modulator)."""
        self.stuck_weight = float(np.clip(w, 0.0, 1.0))

    def _window_reading(self, lo: float, hi: float) -> float:
        """Terrain summary over [x+lo, x+hi]: first block front wins, then gaps."""
        for b in self.blocks:
            front = b - BLOCK_WIDTH / 2.0
            if self.x + lo <= front <= self.x + hi:
                return BLOCK_HEIGHT
        for g0, g1 in self.gaps:
            if g0 <= self.x + hi and self.x + lo <= g1:
                return -GAP_WIDTH
        return 0.0

    def _obs(self) -> np.ndarray:
        grounded = 1.0 if self.h <= 0.0 else 0.0
        proprio = [self.h, self.v, self.vh, self.pitch,
                   math.sin(self.phase), math.cos(self.phase), grounded,
                   self.last_stiffness]
        ranges = [self._window_reading(lo, hi) for lo, hi in SENSOR_WINDOWS]
        return np.array(proprio + ranges)

    def _info(self, stuck_flag: bool) -> dict:
        return {
            "bomb_present": False,
            "bomb_center": None,
            "bomb_distance": None,
            "shaping_proxy": 0.0,
            "shaping_conservative": 0.0,
            "stuck_flag": stuck_flag,
            "trial_kind": self.trial,
        }

    def _progress_potential(self, x: float) -> float:
        z = min(max(x / TRACK_LENGTH, 0.0), 1.0)
        return PROGRESS_TOTAL * z * z

    def step(self, action) -> StepResult:
        if self._done:
            raise UsageError("step() after episode end; call reset()")
        a = np.clip(np.asarray(action, dtype=float), -1.0, 1.0)
        drive, knee, balance, stiffness = (float(a[0]), float(a[1]),
                                           float(a[2]), float(a[3]))
        self.last_stiffness = stiffness
        self.t += 1
        x_before = self.x
        h_before = self.h
        grounded = self.h <= 0.0
        fell = False

        self.pitch += DT * (BALANCE_GAIN * balance - BALANCE_RESTORE * self.pitch)
        friction = FRICTION * (1.0 + abs(self.pitch))
        if grounded:
            self.v += DT * (DRIVE_ACCEL * drive - friction * self.v)
            self.v = float(np.clip(self.v, 0.0, SPEED_LIMIT))
            if knee > HOP_THRESHOLD:
                self.vh = HOP_VELOCITY * knee
                self.v = min(self.v + HOP_FORWARD * knee, SPEED_LIMIT)
                grounded = False
        if not grounded:
            self.vh -= GRAVITY * DT
            self.h += self.vh * DT

        x_new = self.x + self.v * DT
        for b in sorted(self.blocks):
            front = b - BLOCK_WIDTH / 2.0
            if self.x <= front < x_new:
                frac = (front - self.x) / (x_new - self.x)
                h_cross = h_before + (self.h - h_before) * frac
                if h_cross < BLOCK_HEIGHT:
                    # bonk: rebound off the block front and drop to the ground
                    x_new = max(front - BONK_REBOUND, 0.0)
                    self.v = 0.0
                    if self.h > 0.0:
                        self.h, self.vh = 0.0, 0.0
                    break
        self.x = x_new

        if self.h <= 0.0 and not grounded:
            impact = abs(self.vh)
            self.h, self.vh = 0.0, 0.0
            if impact > SAFE_IMPACT + STIFFNESS_IMPACT_BONUS * max(stiffness, 0.0):
                fell = True
        if self.h <= 0.0:
            for g0, g1 in self.gaps:
                if g0 <= self.x <= g1:
                    fell = True
            self.phase += self.v * DT * 6.0

        base = (self._progress_potential(self.x) - self._progress_potential(x_before)
                + LIVING_COST
                + TORQUE_COST * (drive * drive + knee * knee
                                 + balance * balance + stiffness * stiffness))
        self._recent.append(base)
        r_stuck = stuck_reward(self._recent)
        stuck_flag = r_stuck < 0.0
        self._stuck_streak = self._stuck_streak + 1 if stuck_flag else 0

        components = {"base": base, "stuck": 0.0, "fall": 0.0}
        if self.include_stuck_reward:
            components["stuck"] = self.stuck_weight * r_stuck
        cause = CAUSE_RUNNING
        done = False
        if fell:
            if self.include_fall_penalty:
                components["fall"] = FALL_PENALTY
            cause, done = CAUSE_FELL, True
        elif self.x >= TRACK_LENGTH:
            cause, done = CAUSE_FINISHED, True
        elif self.t >= self.spec.max_steps:
            cause, done = CAUSE_TIMEOUT, True
        elif self.stuck_timeout and self._stuck_streak >= self.stuck_timeout:
            cause, done = CAUSE_TIMEOUT, True
        self._done = done
        info = self._info(stuck_flag)
        info["stuck_raw"] = r_stuck
        return StepResult(self._obs(), compose_reward(components), components,
                          done, cause, info)
