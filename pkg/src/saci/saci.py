"""Inhibitory-network extension of SAC.

Two evaluative branches share one policy: the regular branch R keeps the
previously learned evaluation, the inhibitory branch I learns the new one.
Each branch owns a twin critic, a replay buffer, and an entropy temperature;
the policy minimizes the sum of the per-branch objectives.  Branch membership
of a state comes from a deterministic inhibition rule or from a learned
inhibitory policy acting as a hard switch or a soft penalty modulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointError, UsageError
from .numcore import adam_init, mlp_zeros
from .replay import RingBuffer, SacBatch, Transition
from .sac import (
    GaussianPolicy,
    Temperature,
    TwinQ,
    alpha_adam_step,
    alpha_loss,
    apply_policy_update,
    branch_update,
    deterministic_action,
    make_policy,
    make_temperature,
    make_twin_q,
    policy_backward,
    policy_forward_sample,
    sample_action,
    _policy_loss_terms,
)

BRANCH_R = "R"
BRANCH_I = "I"


class ReplayPartition:
    """Branch-partitioned replay: one ring buffer per evaluative branch."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int = 1_000_000):
        self.d_r = RingBuffer(obs_dim, act_dim, capacity)
        self.d_i = RingBuffer(obs_dim, act_dim, capacity)

    def buffer(self, branch: str) -> RingBuffer:
        return self.d_i if branch == BRANCH_I else self.d_r


def push_transition(partition: ReplayPartition, t: Transition):
    """Append to the buffer matching the transition's branch label."""
    partition.buffer(t.branch).push(t)


def sample_batches(partition: ReplayPartition, batch_size: int,
                   rng: np.random.Generator):
    """Draw (batch_r, batch_i); a buffer with fill < batch_size yields None.

    The R draw happens before the I draw, and an underfilled buffer consumes
    no randomness, so a run whose D_I stays empty uses the stream exactly the
    way a single-buffer SAC run does.
    """
    batch_r = None
    batch_i = None
    if partition.d_r.fill >= batch_size:
        batch_r = partition.d_r.sample(batch_size, rng)
    if partition.d_i.fill >= batch_size:
        batch_i = partition.d_i.sample(batch_size, rng)
    return batch_r, batch_i


@dataclass
class InhibitoryPolicy:
    """Learned inhibition: a 1-D-action SAC agent over the shared buffers.

    In hard-switch mode the squashed action's sign selects the branch; in
    soft-modulator mode the action maps affinely onto a stuck-penalty weight
    w in [0, 1] and branching falls back to `base_rule`.
    """

    mode: str  # "hard_switch" | "soft_modulator"
    policy: GaussianPolicy
    twin: TwinQ
    temp: Temperature
    warmup_episodes: int = 0
    base_rule: object = None


def make_inhibitory_policy(obs_dim: int, hidden, mode: str,
                           warmup_episodes: int, seed: int,
                           base_rule=None,
                           target_entropy: float = -1.0) -> InhibitoryPolicy:
    if mode not in ("hard_switch", "soft_modulator"):
        raise UsageError(f"unknown inhibitory policy mode {mode!r}")
    return InhibitoryPolicy(
        mode,
        make_policy(obs_dim, 1, hidden, seed),
        make_twin_q(obs_dim, 1, hidden, seed + 20),
        make_temperature(target_entropy),
        warmup_episodes,
        base_rule,
    )


@dataclass
class SaciAgent:
    """Shared policy, per-branch twin critics and temperatures, optional
    inhibitory policy."""

    policy: GaussianPolicy
    twin_r: TwinQ
    twin_i: TwinQ
    temp_r: Temperature
    temp_i: Temperature
    inhibitory: InhibitoryPolicy = None


def make_saci_agent(obs_dim: int, act_dim: int, hidden, target_entropy: float,
                    seed: int, inhibitory: InhibitoryPolicy = None) -> SaciAgent:
    """Fresh agent; the R nets use the same init seeds a plain SAC agent
    built with this seed would, so transferred and from-scratch runs align."""
    return SaciAgent(
        make_policy(obs_dim, act_dim, hidden, seed),
        make_twin_q(obs_dim, act_dim, hidden, seed + 10),
        make_twin_q(obs_dim, act_dim, hidden, seed + 30),
        make_temperature(target_entropy),
        make_temperature(target_entropy),
        inhibitory,
    )


def inhibitor_decision(rule_or_policy, state, env_info, noise=None):
    """One acting-time branching decision.

    Returns (branch, weight_or_none, squashed_inhibitory_action).  A rule is
    any deterministic callable (state, env_info) -> branch.  A hard-switch
    inhibitory policy selects I iff its tanh-squashed action is positive
    (sampled when `noise` is given, the distribution mode otherwise).  A soft
    modulator emits the weight w = (action + 1) / 2 and delegates branching
    to its base rule (R when none is set).
    """
    if isinstance(rule_or_policy, InhibitoryPolicy):
        ip = rule_or_policy
        if noise is None:
            a = deterministic_action(ip.policy, state)
        else:
            a, _ = sample_action(ip.policy, state, noise)
        act = float(a[0])
        if ip.mode == "hard_switch":
            return (BRANCH_I if act > 0.0 else BRANCH_R), None, act
        w = (act + 1.0) / 2.0
        if ip.base_rule is not None:
            return ip.base_rule(state, env_info), w, act
        return BRANCH_R, w, act
    return rule_or_policy(state, env_info), None, 0.0


def classify_state(rule_or_policy, state, env_info, noise=None):
    """Assign a branch to a state; returns (branch, weight_or_none)."""
    branch, w, _ = inhibitor_decision(rule_or_policy, state, env_info, noise)
    return branch, w


def modulator_weight(ip: InhibitoryPolicy, state, noise=None) -> float:
    """Map the 1-D squashed action onto w = (tanh(u) + 1) / 2 in [0, 1]."""
    if ip.mode != "soft_modulator":
        raise UsageError("modulator_weight requires soft_modulator mode")
    if noise is None:
        a = deterministic_action(ip.policy, state)
    else:
        a, _ = sample_action(ip.policy, state, noise)
    return float((a[0] + 1.0) / 2.0)


def q_loss_branch(twin_k: TwinQ, batch_k: SacBatch, policy: GaussianPolicy,
                  alpha_k: float, gamma: float, noise: np.ndarray):
    """Per-branch critic loss: the single-branch form applied to the branch
    reward, branch twin targets, and branch temperature.  Bootstrapping uses
    the branch-k target heads even when s' belongs to the other partition."""
    from .sac import q_loss

    return q_loss(twin_k, batch_k, policy, alpha_k, gamma, noise)


def dual_alpha_loss(temp_k: Temperature, log_probs_on_branch_k: np.ndarray):
    """Per-branch temperature loss; the two temperatures evolve independently."""
    return alpha_loss(temp_k, log_probs_on_branch_k)


def composite_policy_loss(policy: GaussianPolicy, twin_r: TwinQ, twin_i: TwinQ,
                          batch_r, batch_i, alpha_r: float, alpha_i: float,
                          noise_r=None, noise_i=None):
    """Sum over branches of mean[alpha_k logpi - min Q_k(s_k, a)].

    Each branch term is a mean over its own batch; a missing branch
    contributes nothing, so with one batch this is exactly the single-branch
    policy objective.  Returns (loss, policy parameter gradients).
    """
    total_loss = 0.0
    total_grads = None
    for twin, batch, alpha, noise in ((twin_r, batch_r, alpha_r, noise_r),
                                      (twin_i, batch_i, alpha_i, noise_i)):
        if batch is None:
            continue
        sample = policy_forward_sample(policy, batch.states, noise)
        loss, d_actions, d_log_probs = _policy_loss_terms(policy, twin, sample,
                                                          alpha)
        grads = policy_backward(policy, sample, d_actions, d_log_probs)
        total_loss += loss
        if total_grads is None:
            total_grads = grads
        else:
            total_grads.flat += grads.flat
    if total_grads is None:
        raise UsageError("composite policy loss needs at least one branch batch")
    return total_loss, total_grads


def _split_single_buffer_batch(batch: SacBatch):
    """Single-buffer view: per-branch reward columns with the off-branch
    reward zeroed, as stored tuples (s, a, r_R, r_I, s') would provide."""
    is_i = batch.branches
    batch_r = SacBatch(batch.states, batch.actions,
                       batch.rewards * (1.0 - is_i), batch.next_states,
                       batch.dones, batch.raw_rewards, batch.pi_actions, is_i)
    batch_i = SacBatch(batch.states, batch.actions, batch.rewards * is_i,
                       batch.next_states, batch.dones, batch.raw_rewards,
                       batch.pi_actions, is_i)
    return batch_r, batch_i


def saci_update_step(agent: SaciAgent, partition: ReplayPartition,
                     batch_size: int, gamma: float, tau: float, lr: float,
                     rng_sampler: np.random.Generator,
                     rng_update: np.random.Generator,
                     episodic_memory: bool = True, dual_alpha: bool = True,
                     train_pi: bool = False):
    """One gradient block: critics, temperatures, targets per branch, then the
    shared policy, then the inhibitory policy when requested.

    Returns a metrics dict or None when no branch has enough data.  With
    `episodic_memory` off, one mixed batch from D_R feeds both branches with
    the off-branch rewards zeroed; with `dual_alpha` off a single temperature
    (temp_r) serves both branches and updates once per step.
    """
    if episodic_memory:
        batch_r, batch_i = sample_batches(partition, batch_size, rng_sampler)
    else:
        if partition.d_r.fill < batch_size:
            return None
        mixed = partition.d_r.sample(batch_size, rng_sampler)
        batch_r, batch_i = _split_single_buffer_batch(mixed)
    if batch_r is None and batch_i is None:
        return None

    steps = {}
    for branch, twin, batch in ((BRANCH_R, agent.twin_r, batch_r),
                                (BRANCH_I, agent.twin_i, batch_i)):
        if batch is None:
            continue
        if dual_alpha:
            temp = agent.temp_r if branch == BRANCH_R else agent.temp_i
        else:
            temp = agent.temp_r
        step, new_temp = branch_update(agent.policy, twin, temp, batch, gamma,
                                       tau, lr, rng_update,
                                       update_alpha=dual_alpha)
        if dual_alpha:
            if branch == BRANCH_R:
                agent.temp_r = new_temp
            else:
                agent.temp_i = new_temp
        steps[branch] = step

    if not dual_alpha:
        log_probs = np.concatenate([s.sample.log_probs for s in steps.values()])
        a_loss, a_grad = alpha_loss(agent.temp_r, log_probs)
        agent.temp_r = alpha_adam_step(agent.temp_r, a_grad, lr)
        agent.temp_i = agent.temp_r

    terms = []
    for branch, step in steps.items():
        twin = agent.twin_r if branch == BRANCH_R else agent.twin_i
        temp = agent.temp_r if (branch == BRANCH_R or not dual_alpha) else agent.temp_i
        if episodic_memory:
            terms.append((twin, temp.alpha, step, None))
        else:
            mask = step.batch.branches if branch == BRANCH_I else 1.0 - step.batch.branches
            n = float(mask.sum())
            if n == 0.0:
                continue
            terms.append((twin, temp.alpha, step, mask / n))
    pi_loss = math.nan
    if terms:
        pi_loss = apply_policy_update(agent.policy, terms, lr)

    metrics = {
        "loss_q_r": steps[BRANCH_R].q_loss if BRANCH_R in steps else math.nan,
        "loss_q_i": steps[BRANCH_I].q_loss if BRANCH_I in steps else math.nan,
        "loss_pi": pi_loss,
        "loss_alpha_r": steps[BRANCH_R].alpha_loss if (dual_alpha and BRANCH_R in steps) else math.nan,
        "loss_alpha_i": steps[BRANCH_I].alpha_loss if (dual_alpha and BRANCH_I in steps) else math.nan,
        "alpha_r": agent.temp_r.alpha,
        "alpha_i": agent.temp_i.alpha,
    }
    if not dual_alpha:
        metrics["loss_alpha_r"] = a_loss
        metrics["loss_alpha_i"] = a_loss
    if train_pi and agent.inhibitory is not None:
        pi_metrics = _inhibitory_sac_step(agent.inhibitory, partition,
                                          batch_size, gamma, tau, lr,
                                          rng_sampler, rng_update)
        if pi_metrics is not None:
            metrics.update(pi_metrics)
    return metrics


def _inhibitory_sac_step(ip: InhibitoryPolicy, partition: ReplayPartition,
                         batch_size: int, gamma: float, tau: float, lr: float,
                         rng_sampler: np.random.Generator,
                         rng_update: np.random.Generator):
    """One SAC update of the inhibitory policy on the raw environment reward.

    Mirrors the main agent's sampler over the shared partition; the stored
    1-D inhibitory actions are the actions being evaluated.
    """
    batch_r, batch_i = sample_batches(partition, batch_size, rng_sampler)
    parts = [b for b in (batch_r, batch_i) if b is not None]
    if not parts:
        return None
    states = np.concatenate([b.states for b in parts])
    batch = SacBatch(
        states=states,
        actions=np.concatenate([b.pi_actions for b in parts])[:, None],
        rewards=np.concatenate([b.raw_rewards for b in parts]),
        next_states=np.concatenate([b.next_states for b in parts]),
        dones=np.concatenate([b.dones for b in parts]),
        raw_rewards=np.concatenate([b.raw_rewards for b in parts]),
        pi_actions=np.concatenate([b.pi_actions for b in parts]),
    )
    step, ip.temp = branch_update(ip.policy, ip.twin, ip.temp, batch, gamma,
                                  tau, lr, rng_update)
    loss_pi = apply_policy_update(ip.policy, [(ip.twin, ip.temp.alpha, step, None)],
                                  lr)
    return {"loss_q_pi_i": step.q_loss, "loss_pi_i": loss_pi,
            "alpha_pi_i": ip.temp.alpha}


def inhibitory_policy_update(agent: SaciAgent, partition: ReplayPartition,
                             batch_size: int, gamma: float, tau: float,
                             lr: float, episodes_done: int,
                             rng_sampler: np.random.Generator,
                             rng_update: np.random.Generator):
    """Train the inhibitory policy once warmup has elapsed; no-op before."""
    ip = agent.inhibitory
    if ip is None:
        raise UsageError("agent has no inhibitory policy")
    if episodes_done < ip.warmup_episodes:
        return None
    return _inhibitory_sac_step(ip, partition, batch_size, gamma, tau, lr,
                                rng_sampler, rng_update)


def _assign_mlp_from_tensors(params, tensors: dict, prefix: str):
    """Fresh MlpParams whose layers come from tensors named `{prefix}w{i}` /
    `{prefix}b{i}`; shape mismatches raise CheckpointError."""
    new = mlp_zeros(params.layer_sizes)
    for i, (w, b) in enumerate(zip(new.weights, new.biases)):
        for name, dest in ((f"{prefix}w{i}", w), (f"{prefix}b{i}", b)):
            if name not in tensors:
                raise CheckpointError(f"checkpoint missing tensor {name!r}")
            src = tensors[name]
            if src.shape != dest.shape:
                raise CheckpointError(
                    f"tensor {name!r} has shape {src.shape}, agent needs {dest.shape}")
            dest[...] = src
    return new


def retrain_from(agent: SaciAgent, tensors: dict,
                 load_twin_i: bool = False) -> SaciAgent:
    """Transfer a plain-SAC baseline into this agent for retraining.

    The policy, regular twin critic (with targets), and regular temperature
    come from the baseline; the inhibitory twin is left freshly initialized
    unless `load_twin_i`, which warm-starts it from the same baseline heads.
    Optimizer moments restart from zero.
    """
    agent.policy.net = _assign_mlp_from_tensors(agent.policy.net, tensors,
                                                "policy.")
    agent.policy.adam = adam_init(agent.policy.net)
    targets = [agent.twin_r]
    if load_twin_i:
        targets.append(agent.twin_i)
    for twin in targets:
        twin.q1 = _assign_mlp_from_tensors(twin.q1, tensors, "q1.")
        twin.q2 = _assign_mlp_from_tensors(twin.q2, tensors, "q2.")
        twin.q1_target = _assign_mlp_from_tensors(twin.q1_target, tensors,
                                                  "q1_target.")
        twin.q2_target = _assign_mlp_from_tensors(twin.q2_target, tensors,
                                                  "q2_target.")
        twin.adam_q1 = adam_init(twin.q1)
        twin.adam_q2 = adam_init(twin.q2)
    if "log_alpha" in tensors:
        agent.temp_r = make_temperature(agent.temp_r.target_entropy,
                                        float(tensors["log_alpha"]))
    return agent
