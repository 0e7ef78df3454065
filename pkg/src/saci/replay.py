"""Ring-buffer experience replay.

One `RingBuffer` is the plain-SAC store; the branch-partitioned pair used by
the inhibitory agent lives in `saci.ReplayPartition`.  Storage is columnar
numpy, grown geometrically up to capacity so desk-scale runs never pay for the
full 1e6-slot default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

_INITIAL_SLOTS = 1024


@dataclass
class Transition:
    """One environment step as stored for learning.

    `reward` is the branch reward selected at push time; `raw_reward` keeps the
    unshaped environment reward so the inhibitory policy can train on it.
    `pi_action` is the squashed inhibitory-policy action taken at this state
    (0.0 when no inhibitory policy runs).  `branch` is "R" or "I".
    """

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: float
    raw_reward: float = 0.0
    pi_action: float = 0.0
    branch: str = "R"


@dataclass
class SacBatch:
    """Mini-batch of transitions in columnar form.

    `branches` holds 0.0 for branch R and 1.0 for branch I.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    raw_rewards: np.ndarray
    pi_actions: np.ndarray
    branches: np.ndarray = None

    @property
    def size(self) -> int:
        return self.states.shape[0]


class RingBuffer:
    """FIFO experience store; oldest transitions are evicted at capacity."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int):
        if capacity < 1:
            raise UsageError("replay capacity must be >= 1")
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.capacity = capacity
        self.fill = 0
        self._cursor = 0
        self._alloc(min(_INITIAL_SLOTS, capacity))

    def _alloc(self, slots: int):
        self._slots = slots
        self._states = np.zeros((slots, self.obs_dim))
        self._actions = np.zeros((slots, self.act_dim))
        self._rewards = np.zeros(slots)
        self._next_states = np.zeros((slots, self.obs_dim))
        self._dones = np.zeros(slots)
        self._raw_rewards = np.zeros(slots)
        self._pi_actions = np.zeros(slots)
        self._branches = np.zeros(slots)

    def _grow(self):
        new_slots = min(self._slots * 2, self.capacity)
        for name in ("_states", "_actions", "_rewards", "_next_states",
                     "_dones", "_raw_rewards", "_pi_actions", "_branches"):
            old = getattr(self, name)
            fresh = np.zeros((new_slots,) + old.shape[1:])
            fresh[: self.fill] = old[: self.fill]
            setattr(self, name, fresh)
        self._slots = new_slots

    def push(self, t: Transition):
        if self._cursor >= self._slots and self._slots < self.capacity:
            self._grow()
        i = self._cursor % self._slots
        self._states[i] = t.state
        self._actions[i] = t.action
        self._rewards[i] = t.reward
        self._next_states[i] = t.next_state
        self._dones[i] = t.done
        self._raw_rewards[i] = t.raw_reward
        self._pi_actions[i] = t.pi_action
        self._branches[i] = 1.0 if t.branch == "I" else 0.0
        self._cursor = (self._cursor + 1) % self.capacity
        self.fill = min(self.fill + 1, self.capacity)

    def get(self, i: int) -> Transition:
        if not 0 <= i < self.fill:
            raise UsageError(f"index {i} out of range for fill {self.fill}")
        return Transition(
            self._states[i].copy(), self._actions[i].copy(),
            float(self._rewards[i]), self._next_states[i].copy(),
            float(self._dones[i]), float(self._raw_rewards[i]),
            float(self._pi_actions[i]),
            "I" if self._branches[i] == 1.0 else "R",
        )

    def sample(self, batch_size: int, rng: np.random.Generator) -> SacBatch:
        """Uniform sample with replacement; requires fill >= batch_size."""
        if self.fill < batch_size:
            raise UsageError(f"buffer fill {self.fill} < batch size {batch_size}")
        idx = rng.integers(0, self.fill, size=batch_size)
        return SacBatch(
            self._states[idx], self._actions[idx], self._rewards[idx],
            self._next_states[idx], self._dones[idx],
            self._raw_rewards[idx], self._pi_actions[idx], self._branches[idx],
        )
