"""Built-in deterministic inhibition rules.

Each rule is total over the state space: with no bomb/zone present it
returns the regular branch.  Rules read geometry from the step info rather
than re-deriving it from raw observations.
"""

from __future__ import annotations

BRANCH_R = "R"
BRANCH_I = "I"


def lander_proximity_rule(state, info) -> str:
    """I iff the lander is above the bomb and within the avoidance radius:
    y > y_b and d_b < 0.3."""
    if not info.get("bomb_present"):
        return BRANCH_R
    y = float(state[1])
    y_b = info["bomb_center"][1]
    if y > y_b and info["bomb_distance"] < 0.3:
        return BRANCH_I
    return BRANCH_R


def lander_conservative_rule(state, info) -> str:
    """I iff horizontally close above the bomb: d_x < 0.2 and y > y_b."""
    if not info.get("bomb_present"):
        return BRANCH_R
    y = float(state[1])
    y_b = info["bomb_center"][1]
    if info["bomb_dx"] < 0.2 and y > y_b:
        return BRANCH_I
    return BRANCH_R


def bomb_present_rule(state, info) -> str:
    """Simplest switch: inhibit whenever a bomb/zone is on screen."""
    return BRANCH_I if info.get("bomb_present") else BRANCH_R


def stopgo_proximity_rule(state, info) -> str:
    """I iff an active zone lies within the avoidance radius of the agent."""
    if not info.get("bomb_present"):
        return BRANCH_R
    return BRANCH_I if info["bomb_distance"] < 0.3 else BRANCH_R


def runner_stuck_rule(state, info) -> str:
    """I iff the trailing reward window marks the runner as stuck."""
    return BRANCH_I if info.get("stuck_flag") else BRANCH_R


RULES = {
    "lander_proximity": lander_proximity_rule,
    "lander_conservative": lander_conservative_rule,
    "bomb_present": bomb_present_rule,
    "stopgo_proximity": stopgo_proximity_rule,
    "runner_stuck": runner_stuck_rule,
}
