"""Training configuration and its flat key = value text format.

Dataclass defaults follow the common hyperparameter table (Adam, lr 5e-4,
gamma 0.99, tau 1e-3, entropy target -3, 256 hidden units, replay 1e6).
Desk-scale presets override sizes and budgets; see presets.py.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

# section of the config text each field belongs to
_SECTIONS = {
    "run": ("algo", "env", "episodes", "max_total_steps", "seed", "out_dir",
            "load", "load_twin_i", "checkpoint_every", "eval_every_steps",
            "eval_episodes"),
    "sac": ("batch_size", "lr", "gamma", "tau", "target_entropy",
            "hidden_layers", "hidden_units", "replay_capacity"),
    "saci": ("inhibition", "inhibition_rule", "episodic_memory", "dual_alpha",
             "pi_warmup_episodes"),
    "envs": ("bomb_freq", "stop_prob", "shaping", "env_max_steps",
             "include_fall_penalty", "include_stuck_reward", "include_gaps",
             "stuck_timeout"),
}


@dataclass
class TrainConfig:
    # run orchestration
    algo: str = "saci"                 # sac | saci
    env: str = "stopgo"                # stopgo | lander | runner
    episodes: int = 2000
    max_total_steps: int = 0           # 0 = episode budget only
    seed: int = 0
    out_dir: str = "runs/run"
    load: str = ""                     # baseline checkpoint for retraining
    load_twin_i: bool = False          # warm-start Q-I from the baseline too
    checkpoint_every: int = 0          # episodes between snapshots; 0 = end only
    eval_every_steps: int = 0          # 0 = no periodic evaluation
    eval_episodes: int = 20
    # agent
    batch_size: int = 64
    lr: float = 5e-4
    gamma: float = 0.99
    tau: float = 1e-3
    target_entropy: float = -3.0
    hidden_layers: int = 1
    hidden_units: int = 256
    replay_capacity: int = 1_000_000
    # inhibition
    inhibition: str = "rule"           # rule | hard_switch | soft_modulator
    inhibition_rule: str = ""          # empty = env default
    episodic_memory: bool = True
    dual_alpha: bool = True
    pi_warmup_episodes: int = 0
    # environment
    bomb_freq: float = 0.5
    stop_prob: float = 0.5
    shaping: str = "proxy"             # none | proxy | conservative
    env_max_steps: int = 0             # 0 = env default
    include_fall_penalty: bool = True
    include_stuck_reward: bool = False
    include_gaps: bool = False
    stuck_timeout: int = 0

    @property
    def hidden(self) -> tuple:
        return (self.hidden_units,) * self.hidden_layers

    def validate(self) -> "TrainConfig":
        if self.algo not in ("sac", "saci"):
            raise ConfigError(f"unknown algo {self.algo!r}")
        if self.env not in ("stopgo", "lander", "runner"):
            raise ConfigError(f"unknown env {self.env!r}")
        if self.shaping not in ("none", "proxy", "conservative"):
            raise ConfigError(f"unknown shaping {self.shaping!r}")
        if self.inhibition not in ("rule", "hard_switch", "soft_modulator"):
            raise ConfigError(f"unknown inhibition mode {self.inhibition!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma {self.gamma} outside [0, 1)")
        if self.batch_size < 1 or self.episodes < 1:
            raise ConfigError("batch_size and episodes must be positive")
        return self

    def rule_name(self) -> str:
        if self.inhibition_rule:
            return self.inhibition_rule
        if self.env == "stopgo":
            return "stopgo_proximity"
        if self.env == "lander":
            return {"proxy": "lander_proximity",
                    "conservative": "lander_conservative",
                    "none": "bomb_present"}[self.shaping]
        return "runner_stuck"


def config_to_text(cfg: TrainConfig) -> str:
    parser = configparser.ConfigParser()
    values = asdict(cfg)
    for section, keys in _SECTIONS.items():
        parser[section] = {k: str(values[k]) for k in keys}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def config_from_text(text: str) -> TrainConfig:
    parser = configparser.ConfigParser()
    parser.read_string(text)
    types = {f.name: f.type for f in fields(TrainConfig)}
    kwargs = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            ftype = types[key]
            if ftype == "bool":
                kwargs[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            elif ftype == "int":
                kwargs[key] = int(raw)
            elif ftype == "float":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
    return TrainConfig(**kwargs).validate()


def load_config(path) -> TrainConfig:
    with open(path) as fh:
        return config_from_text(fh.read())


def save_config(cfg: TrainConfig, path):
    with open(path, "w") as fh:
        fh.write(config_to_text(cfg))
