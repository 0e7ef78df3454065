"""Construction helpers shared by training and evaluation."""

from __future__ import annotations

import numpy as np

from ..envs import make_env
from ..envs.rules import RULES
from ..sac import make_sac_agent
from ..saci import make_inhibitory_policy, make_saci_agent
from .config import TrainConfig


def derive_streams(master_seed: int) -> dict:
    """Named per-component generators spawned from one master seed."""
    children = np.random.SeedSequence(master_seed).spawn(5)
    names = ("env", "action", "update", "sampler", "init")
    return {name: np.random.default_rng(seq) for name, seq in zip(names, children)}


def env_kwargs(cfg: TrainConfig) -> dict:
    kwargs = {}
    if cfg.env in ("stopgo", "lander"):
        kwargs["bomb_freq"] = cfg.bomb_freq
    if cfg.env == "runner":
        kwargs.update(stop_prob=cfg.stop_prob,
                      include_fall_penalty=cfg.include_fall_penalty,
                      include_stuck_reward=cfg.include_stuck_reward,
                      include_gaps=cfg.include_gaps,
                      stuck_timeout=cfg.stuck_timeout)
    if cfg.env_max_steps:
        kwargs["max_steps"] = cfg.env_max_steps
    return kwargs


def build_env(cfg: TrainConfig, rng: np.random.Generator, **overrides):
    kwargs = env_kwargs(cfg)
    kwargs.update(overrides)
    return make_env(cfg.env, rng, **kwargs)


def build_agent(cfg: TrainConfig, obs_dim: int, act_dim: int, init_seed: int):
    if cfg.algo == "sac":
        return make_sac_agent(obs_dim, act_dim, cfg.hidden, cfg.target_entropy,
                              init_seed)
    inhibitory = None
    if cfg.inhibition in ("hard_switch", "soft_modulator"):
        base_rule = (RULES[cfg.rule_name()]
                     if cfg.inhibition == "soft_modulator" else None)
        inhibitory = make_inhibitory_policy(
            obs_dim, cfg.hidden, cfg.inhibition, cfg.pi_warmup_episodes,
            init_seed + 50, base_rule=base_rule)
    return make_saci_agent(obs_dim, act_dim, cfg.hidden, cfg.target_entropy,
                           init_seed, inhibitory)
