"""Training orchestration: seeding, the episode loop, periodic evaluation,
and checkpointing.

One master seed derives independent streams (env, action noise, update noise,
batch sampler, agent init) via SeedSequence spawning, so e.g. changing the
sampler stream cannot alter environment trajectories until a learned action
actually differs.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

from ..envs.rules import RULES
from ..replay import RingBuffer, Transition
from ..sac import sac_update_step, sample_action
from ..saci import (
    BRANCH_I,
    ReplayPartition,
    inhibitor_decision,
    push_transition,
    retrain_from,
    saci_update_step,
)
from .checkpoint import (
    load_checkpoint,
    load_sac_agent,
    sac_agent_tensors,
    saci_agent_tensors,
    save_checkpoint,
)
from .config import TrainConfig, config_to_text
from .evaluate import EVAL_COLUMNS, evaluate_agent
from .factory import build_agent, build_env, derive_streams
from .metrics import Avg100, MeanAccumulator, MetricsRecord, MetricsWriter


def sac_training_reward(cfg: TrainConfig, res) -> float:
    """Reward the single-critic agent trains on: raw plus any configured
    shaping (applied everywhere, since plain SAC has no branches)."""
    if cfg.env in ("stopgo", "lander"):
        if cfg.shaping == "proxy":
            return res.reward_raw + res.info["shaping_proxy"]
        if cfg.shaping == "conservative":
            return res.reward_raw + res.info["shaping_conservative"]
    return res.reward_raw


def branch_reward(cfg: TrainConfig, branch: str, res, w) -> float:
    """Per-branch reward stored for the inhibitory agent.

    Regular states keep the raw reward.  Inhibitory lander/stop-go states
    store the configured shaping value; the runner composes base + w * stuck
    (+ fall when enabled) per the adaptive-inhibition formulation, with w = 1
    for the rule-based agent.
    """
    if cfg.env == "runner":
        if w is None:
            return res.reward_raw
        comp = res.reward_components
        return comp["base"] + w * comp["stuck"] + comp["fall"]
    if branch == BRANCH_I:
        if cfg.shaping == "proxy":
            return res.info["shaping_proxy"]
        if cfg.shaping == "conservative":
            return res.info["shaping_conservative"]
    return res.reward_raw


@dataclass
class RunResult:
    out_dir: str
    metrics_path: str
    eval_path: str
    checkpoint_path: str
    episodes: int
    steps: int
    final_avg100: float


def run_training(cfg: TrainConfig, progress=None) -> RunResult:
    """Train per config; returns file locations and final headline metrics.

    Writes metrics.csv, eval.csv (when periodic evaluation is enabled),
    config.txt, and checkpoint.ckpt under cfg.out_dir.
    """
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    streams = derive_streams(cfg.seed)
    env = build_env(cfg, streams["env"])
    obs_dim, act_dim = env.spec.obs_dim, env.spec.act_dim
    init_seed = int(streams["init"].integers(2**31))
    agent = build_agent(cfg, obs_dim, act_dim, init_seed)

    if cfg.load:
        tensors, _ = load_checkpoint(cfg.load)
        if cfg.algo == "sac":
            load_sac_agent(agent, tensors)
        else:
            retrain_from(agent, tensors, load_twin_i=cfg.load_twin_i)

    if cfg.algo == "sac":
        replay = RingBuffer(obs_dim, act_dim, cfg.replay_capacity)
        partition = None
        rule = None
    else:
        partition = ReplayPartition(obs_dim, act_dim, cfg.replay_capacity)
        replay = None
        rule = RULES[cfg.rule_name()]

    metrics_path = os.path.join(cfg.out_dir, "metrics.csv")
    eval_path = os.path.join(cfg.out_dir, "eval.csv")
    checkpoint_path = os.path.join(cfg.out_dir, "checkpoint.ckpt")
    with open(os.path.join(cfg.out_dir, "config.txt"), "w") as fh:
        fh.write(config_to_text(cfg))

    writer = MetricsWriter(metrics_path)
    eval_fh = None
    eval_writer = None
    if cfg.eval_every_steps:
        eval_fh = open(eval_path, "w", newline="")
        eval_writer = csv.writer(eval_fh)
        eval_writer.writerow(EVAL_COLUMNS)
    avg100 = Avg100()
    cause_counts = {}
    global_step = 0
    next_eval = cfg.eval_every_steps
    episodes_done = 0

    def save_snapshot(path):
        tensors = (sac_agent_tensors(agent) if cfg.algo == "sac"
                   else saci_agent_tensors(agent))
        save_checkpoint(path, tensors, config_to_text(cfg))

    def run_eval_point():
        summary = evaluate_agent(agent, cfg, eval_seed=cfg.seed * 1000 + global_step)
        eval_writer.writerow([global_step, episodes_done,
                              repr(summary["success"]),
                              repr(summary["success_go"]),
                              repr(summary["success_stop"]),
                              repr(summary["mean_reward_go"]),
                              repr(summary["mean_reward_stop"])])
        eval_fh.flush()

    for episode in range(cfg.episodes):
        if cfg.max_total_steps and global_step >= cfg.max_total_steps:
            break
        obs = env.reset()
        prev_info = {"bomb_present": False, "stuck_flag": False,
                     "trial_kind": env.trial}
        ep_reward = 0.0
        ep_steps = 0
        losses = {k: MeanAccumulator() for k in
                  ("loss_q_r", "loss_q_i", "loss_pi", "loss_alpha_r",
                   "loss_alpha_i")}
        while True:
            noise = streams["action"].standard_normal(act_dim)
            action, _ = sample_action(agent.policy, obs, noise)
            if cfg.algo == "saci":
                if agent.inhibitory is not None:
                    pi_noise = streams["action"].standard_normal(1)
                    branch, w, pi_act = inhibitor_decision(
                        agent.inhibitory, obs, prev_info, pi_noise)
                else:
                    branch, w, pi_act = inhibitor_decision(rule, obs, prev_info,
                                                           None)
            res = env.step(action)
            if cfg.algo == "sac":
                replay.push(Transition(obs, action,
                                       sac_training_reward(cfg, res), res.obs,
                                       float(res.done), res.reward_raw))
                m = sac_update_step(agent, replay, cfg.batch_size, cfg.gamma,
                                    cfg.tau, cfg.lr, streams["sampler"],
                                    streams["update"])
                if m:
                    losses["loss_q_r"].push(m["loss_q"])
                    losses["loss_pi"].push(m["loss_pi"])
                    losses["loss_alpha_r"].push(m["loss_alpha"])
            else:
                t = Transition(obs, action, branch_reward(cfg, branch, res, w),
                               res.obs, float(res.done), res.reward_raw,
                               pi_act, branch)
                if cfg.episodic_memory:
                    push_transition(partition, t)
                else:
                    partition.d_r.push(t)
                train_pi = (agent.inhibitory is not None
                            and episodes_done >= agent.inhibitory.warmup_episodes)
                m = saci_update_step(agent, partition, cfg.batch_size,
                                     cfg.gamma, cfg.tau, cfg.lr,
                                     streams["sampler"], streams["update"],
                                     episodic_memory=cfg.episodic_memory,
                                     dual_alpha=cfg.dual_alpha,
                                     train_pi=train_pi)
                if m:
                    for key in losses:
                        losses[key].push(m.get(key))
            ep_reward += res.reward_raw
            ep_steps += 1
            global_step += 1
            if eval_writer and global_step >= next_eval:
                run_eval_point()
                next_eval += cfg.eval_every_steps
            obs = res.obs
            prev_info = res.info
            if res.done:
                cause_counts[res.cause] = cause_counts.get(res.cause, 0) + 1
                break
            if cfg.max_total_steps and global_step >= cfg.max_total_steps:
                cause_counts["timeout"] = cause_counts.get("timeout", 0) + 1
                res = None
                break
        episodes_done += 1
        if cfg.algo == "sac":
            alpha_r, alpha_i = agent.temp.alpha, math.nan
            fill_r, fill_i = replay.fill, 0
        else:
            alpha_r, alpha_i = agent.temp_r.alpha, agent.temp_i.alpha
            fill_r, fill_i = partition.d_r.fill, partition.d_i.fill
        writer.write(MetricsRecord(
            episodes_done, global_step, env.trial, ep_steps, ep_reward,
            avg100.push(ep_reward), alpha_r, alpha_i,
            losses["loss_q_r"].value, losses["loss_q_i"].value,
            losses["loss_pi"].value, losses["loss_alpha_r"].value,
            losses["loss_alpha_i"].value, fill_r, fill_i,
            res.cause if res is not None else "timeout", dict(cause_counts)))
        if progress:
            progress(episodes_done, global_step, avg100.value)
        if cfg.checkpoint_every and episodes_done % cfg.checkpoint_every == 0:
            save_snapshot(os.path.join(cfg.out_dir,
                                       f"checkpoint_ep{episodes_done}.ckpt"))
        if cfg.max_total_steps and global_step >= cfg.max_total_steps:
            break
    save_snapshot(checkpoint_path)
    writer.close()
    if eval_fh:
        eval_fh.close()
    return RunResult(cfg.out_dir, metrics_path,
                     eval_path if cfg.eval_every_steps else "",
                     checkpoint_path, episodes_done, global_step, avg100.value)
