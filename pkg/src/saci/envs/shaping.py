"""Reward shapers for the inhibitory branch and the stuck mechanic."""

from __future__ import annotations


def bomb_proxy_shaping(d_b: float) -> float:
    """Quartic proximity penalty around the avoidance radius 0.3.

    Zero at d_b = 0.3 and steeply negative toward the bomb center; only
    meaningful inside the inhibition rule's active region d_b < 0.3.
    """
    return -1e4 * (d_b - 0.3) ** 4


def conservative_shaping(x, y, vx, vy, angle, v_angle, bomb_x, bomb_y) -> float:
    """Landing-aware avoidance shaping: horizontal-distance drive plus
    quadratic penalties on altitude mismatch, tilt, and speed."""
    d_x = abs(x - bomb_x)
    d_y = abs(y - bomb_y)
    r_x = -1.0 / (6.0 * d_x + 0.1) + 0.77
    r_y = -3.0 * (d_y - 0.05) ** 2
    r_angle = -(angle ** 2)
    r_vel = -2.0 * (vx ** 2 + vy ** 2 + v_angle ** 2)
    return r_x + r_y + r_angle + r_vel


def stuck_reward(recent) -> float:
    """Trailing six-step sum of raw rewards, counted only when negative."""
    s = float(sum(recent))
    return s if s < 0.0 else 0.0
