"""Deterministic-policy evaluation: no learning, mode actions only."""

from __future__ import annotations

import math

import numpy as np

from ..envs import CAUSE_FINISHED, CAUSE_LANDED
from ..errors import UsageError
from ..sac import deterministic_action
from .checkpoint import load_checkpoint, load_saci_agent, load_sac_agent
from .config import TrainConfig, config_from_text
from .factory import build_agent, build_env

EVAL_COLUMNS = ["step", "episode", "success", "success_go", "success_stop",
                "mean_reward_go", "mean_reward_stop"]

SUCCESS_CAUSES = (CAUSE_LANDED, CAUSE_FINISHED)


def run_episodes(policy, env, n_episodes: int) -> dict:
    """Roll deterministic episodes; returns mean/std reward, success rate,
    per-cause tallies, and mean length."""
    if n_episodes < 1:
        raise UsageError("evaluation needs at least one episode")
    totals, lengths = [], []
    cause_counts = {}
    for _ in range(n_episodes):
        obs = env.reset()
        total, steps = 0.0, 0
        while True:
            res = env.step(deterministic_action(policy, obs))
            obs = res.obs
            total += res.reward_raw
            steps += 1
            if res.done:
                break
        totals.append(total)
        lengths.append(steps)
        cause_counts[res.cause] = cause_counts.get(res.cause, 0) + 1
    successes = sum(cause_counts.get(c, 0) for c in SUCCESS_CAUSES)
    return {
        "mean_reward": float(np.mean(totals)),
        "std_reward": float(np.std(totals)),
        "success_rate": successes / n_episodes,
        "mean_steps": float(np.mean(lengths)),
        "cause_counts": cause_counts,
        "episodes": n_episodes,
    }


def evaluate_agent(agent, cfg: TrainConfig, eval_seed: int) -> dict:
    """Combined go/stop probe used during training.

    Evaluates half the budget on forced go trials and half on forced stop
    trials, with environments seeded independently of the training streams.
    """
    n_each = max(cfg.eval_episodes // 2, 1)
    split = {}
    for kind, freq in (("go", 0.0), ("stop", 1.0)):
        override = ({"stop_prob": freq} if cfg.env == "runner"
                    else {"bomb_freq": freq})
        env = build_env(cfg, np.random.default_rng((eval_seed, kind == "go")),
                        **override)
        split[kind] = run_episodes(agent.policy, env, n_each)
    total_success = (split["go"]["success_rate"] + split["stop"]["success_rate"]) / 2
    return {
        "success": total_success,
        "success_go": split["go"]["success_rate"],
        "success_stop": split["stop"]["success_rate"],
        "mean_reward_go": split["go"]["mean_reward"],
        "mean_reward_stop": split["stop"]["mean_reward"],
    }


def evaluate_checkpoint(checkpoint_path, n_episodes: int, seed: int = 0,
                        env_name: str = "", **env_overrides) -> dict:
    """Load a checkpoint (its config snapshot included) and evaluate it."""
    tensors, config_text = load_checkpoint(checkpoint_path)
    cfg = config_from_text(config_text)
    if env_name:
        cfg.env = env_name
    env = build_env(cfg, np.random.default_rng(seed), **env_overrides)
    agent = build_agent(cfg, env.spec.obs_dim, env.spec.act_dim, init_seed=0)
    if cfg.algo == "sac":
        load_sac_agent(agent, tensors)
    else:
        load_saci_agent(agent, tensors)
    return run_episodes(agent.policy, env, n_episodes)
