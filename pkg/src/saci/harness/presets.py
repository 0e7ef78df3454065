"""Named experiment presets mirroring the stop-signal retraining designs.

Budgets and network widths are desk-scale: the hyperparameter-table values
stay the TrainConfig defaults, while presets shrink hidden widths and cap
episode lengths so full experiment suites run on a single CPU core.
"""

from __future__ import annotations

from dataclasses import replace

from ..errors import ConfigError
from .config import TrainConfig


def _presets() -> dict:
    stopgo = TrainConfig(
        algo="saci", env="stopgo", hidden_units=64, hidden_layers=1,
        batch_size=64, env_max_steps=400, bomb_freq=0.5, shaping="proxy",
        episodes=100000, max_total_steps=30000, eval_every_steps=1000,
        eval_episodes=24)
    lander = TrainConfig(
        algo="saci", env="lander", hidden_units=64, hidden_layers=1,
        batch_size=64, env_max_steps=400, bomb_freq=0.5, shaping="proxy",
        target_entropy=-1.5, episodes=100000, max_total_steps=100000)
    runner = TrainConfig(
        algo="saci", env="runner", hidden_units=32, hidden_layers=2,
        batch_size=128, env_max_steps=160, stop_prob=0.9,
        include_fall_penalty=False, include_stuck_reward=True,
        stuck_timeout=45, inhibition_rule="runner_stuck", episodes=3000)
    return {
        # stop-go toy: go-only pretraining, then the component-ablation
        # ladder retrains from that baseline (ablation arms mirror the
        # retraining design)
        "stopgo-baseline": replace(stopgo, algo="sac", bomb_freq=0.0,
                                   shaping="none", max_total_steps=10000,
                                   eval_every_steps=2500),
        "stopgo-saci": stopgo,
        "stopgo-saci-episodic": replace(stopgo, dual_alpha=False),
        "stopgo-saci-vanilla": replace(stopgo, dual_alpha=False,
                                       episodic_memory=False),
        "stopgo-sac": replace(stopgo, algo="sac"),
        "stopgo-saci-switch": replace(stopgo, inhibition="hard_switch"),
        # lander: baseline pretraining, retraining, ablations
        "lander-baseline": replace(lander, algo="sac", bomb_freq=0.0,
                                   shaping="none", max_total_steps=100000),
        "lander-bomb-retrain": lander,
        "lander-bomb-scratch": lander,
        "lander-ablation": replace(lander, max_total_steps=60000),
        "lander-sac-shaped": replace(lander, algo="sac"),
        # runner: plain-terrain baseline, hardcore and mixed retraining
        "runner-baseline": replace(runner, algo="sac", stop_prob=0.0,
                                   include_fall_penalty=True,
                                   include_stuck_reward=False,
                                   episodes=1200, max_total_steps=60000),
        "runner-hardcore": replace(runner, stop_prob=1.0),
        "runner-mixed": runner,
        "runner-mixed-sac": replace(runner, algo="sac"),
        "runner-mixed-adaptive": replace(runner, inhibition="soft_modulator",
                                         pi_warmup_episodes=100),
    }


PRESET_NAMES = tuple(sorted(_presets()))


def preset(name: str, **overrides) -> TrainConfig:
    table = _presets()
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(table)}")
    cfg = table[name]
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg.validate()
