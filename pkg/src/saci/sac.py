"""Soft actor-critic building blocks and the plain single-branch agent.

The policy is a tanh-squashed Gaussian over (-1, 1)^d; critics are twin Q
networks with Polyak-averaged targets and clipped double-Q bootstrapping; the
entropy temperature is tuned automatically toward a target entropy.

All gradients are exact reverse-mode chains through `numcore`; there is no
autodiff.  The per-branch update helpers at the bottom are shared with the
inhibitory-network agent so that, with one branch, both agents execute the
same floating-point operations in the same order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .numcore import (
    AdamState,
    MlpParams,
    adam_init,
    adam_step,
    mlp_backward,
    mlp_forward,
    mlp_init,
    mlp_zeros,
    polyak_update,
)
from .replay import RingBuffer, SacBatch

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
SQUASH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class GaussianPolicy:
    """Stochastic actor: state -> (mean, log-std), tanh-squashed on sampling."""

    net: MlpParams
    act_dim: int
    adam: AdamState

    @property
    def obs_dim(self) -> int:
        return self.net.in_dim


@dataclass
class TwinQ:
    """Two independent Q heads plus their Polyak-averaged targets."""

    q1: MlpParams
    q2: MlpParams
    q1_target: MlpParams
    q2_target: MlpParams
    adam_q1: AdamState
    adam_q2: AdamState


@dataclass
class Temperature:
    """Entropy coefficient in log space with its own scalar Adam state."""

    log_alpha: float
    target_entropy: float
    m: float = 0.0
    v: float = 0.0
    t: int = 0

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)


def make_policy(obs_dim: int, act_dim: int, hidden, seed: int) -> GaussianPolicy:
    net = mlp_init((obs_dim, *hidden, 2 * act_dim), seed)
    return GaussianPolicy(net, act_dim, adam_init(net))


def make_twin_q(obs_dim: int, act_dim: int, hidden, seed: int) -> TwinQ:
    sizes = (obs_dim + act_dim, *hidden, 1)
    q1 = mlp_init(sizes, seed)
    q2 = mlp_init(sizes, seed + 1)
    return TwinQ(q1, q2, q1.copy(), q2.copy(), adam_init(q1), adam_init(q2))


def make_temperature(target_entropy: float, log_alpha: float = 0.0) -> Temperature:
    return Temperature(log_alpha, target_entropy)


@dataclass
class PolicySample:
    """Reparameterized draw plus everything the backward pass needs."""

    actions: np.ndarray    # (B, d), in (-1, 1)
    log_probs: np.ndarray  # (B,)
    states: np.ndarray
    noise: np.ndarray
    sigma: np.ndarray
    one_m_a2: np.ndarray   # 1 - actions^2
    clamp_mask: np.ndarray  # 1 where log-std was inside the clamp range
    cache: object          # forward cache of the policy net


def policy_forward_sample(policy: GaussianPolicy, states: np.ndarray,
                          noise: np.ndarray) -> PolicySample:
    out, cache = mlp_forward(policy.net, states)
    d = policy.act_dim
    mu = out[:, :d]
    raw = out[:, d:]
    log_std = np.clip(raw, LOG_STD_MIN, LOG_STD_MAX)
    clamp_mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
    sigma = np.exp(log_std)
    u = mu + sigma * noise
    actions = np.tanh(u)
    if not np.all(np.isfinite(actions)):
        raise NumericError("policy produced non-finite actions")
    one_m_a2 = 1.0 - actions * actions
    log_probs = np.sum(
        -0.5 * noise * noise - log_std - _HALF_LOG_2PI
        - np.log(one_m_a2 + SQUASH_EPS),
        axis=1,
    )
    return PolicySample(actions, log_probs, states, noise, sigma, one_m_a2,
                        clamp_mask, cache)


def policy_backward(policy: GaussianPolicy, sample: PolicySample,
                    d_actions: np.ndarray, d_log_probs: np.ndarray) -> MlpParams:
    """Chain (dL/da, dL/dlogpi) back into policy parameter gradients.

    With u = mu + sigma * eps and a = tanh(u):
      da/dmu = 1 - a^2,                 da/dlogstd = (1 - a^2) * sigma * eps
      dlogpi/dmu = t,                   dlogpi/dlogstd = -1 + t * sigma * eps
    where t = 2 a (1 - a^2) / (1 - a^2 + eps) comes from the squash correction
    and the Gaussian term is constant in mu under reparameterization.
    """
    a = sample.actions
    one_m_a2 = sample.one_m_a2
    sig_eps = sample.sigma * sample.noise
    t = 2.0 * a * one_m_a2 / (one_m_a2 + SQUASH_EPS)
    dlp = d_log_probs[:, None]
    d_mu = d_actions * one_m_a2 + dlp * t
    d_log_std = (d_actions * one_m_a2 * sig_eps + dlp * (-1.0 + t * sig_eps))
    d_log_std = d_log_std * sample.clamp_mask
    grad_out = np.concatenate([d_mu, d_log_std], axis=1)
    grads, _ = mlp_backward(policy.net, sample.cache, grad_out)
    return grads


def sample_action(policy: GaussianPolicy, state: np.ndarray, noise: np.ndarray):
    """Squashed-Gaussian action and its log-density; deterministic given noise.

    Accepts a single state vector with matching noise, or batches of each.
    """
    state = np.asarray(state, dtype=float)
    noise = np.asarray(noise, dtype=float)
    single = state.ndim == 1
    if single:
        state = state[None, :]
        noise = noise[None, :]
    s = policy_forward_sample(policy, state, noise)
    if single:
        return s.actions[0], float(s.log_probs[0])
    return s.actions, s.log_probs


def deterministic_action(policy: GaussianPolicy, state: np.ndarray) -> np.ndarray:
    """Evaluation-mode action: tanh of the Gaussian mean."""
    out, _ = mlp_forward(policy.net, np.asarray(state, dtype=float)[None, :])
    return np.tanh(out[0, : policy.act_dim])


def _q_forward(net: MlpParams, states: np.ndarray, actions: np.ndarray):
    sa = np.concatenate([states, actions], axis=1)
    out, cache = mlp_forward(net, sa)
    return out[:, 0], cache


def target_value(twin: TwinQ, policy: GaussianPolicy, alpha: float,
                 next_states: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Soft state value from the target heads: min(Q1t, Q2t) - alpha * log pi."""
    s = policy_forward_sample(policy, next_states, noise)
    q1t, _ = _q_forward(twin.q1_target, next_states, s.actions)
    q2t, _ = _q_forward(twin.q2_target, next_states, s.actions)
    return np.minimum(q1t, q2t) - alpha * s.log_probs


@dataclass
class QLossResult:
    loss: float
    grads_q1: MlpParams
    grads_q2: MlpParams
    targets: np.ndarray


def q_loss(twin: TwinQ, batch: SacBatch, policy: GaussianPolicy, alpha: float,
           gamma: float, noise: np.ndarray) -> QLossResult:
    """Mean over batch and both heads of 0.5 (Q(s,a) - y)^2.

    y = r + gamma * (1 - done) * V_target(s'), treated as constant.
    """
    B = batch.size
    if B == 0:
        raise UsageError("q_loss needs a non-empty batch")
    v_next = target_value(twin, policy, alpha, batch.next_states, noise)
    y = batch.rewards + gamma * (1.0 - batch.dones) * v_next
    q1, c1 = _q_forward(twin.q1, batch.states, batch.actions)
    q2, c2 = _q_forward(twin.q2, batch.states, batch.actions)
    d1 = q1 - y
    d2 = q2 - y
    loss = 0.25 * (float(np.mean(d1 * d1)) + float(np.mean(d2 * d2)))
    g1, _ = mlp_backward(twin.q1, c1, (d1 / (2.0 * B))[:, None])
    g2, _ = mlp_backward(twin.q2, c2, (d2 / (2.0 * B))[:, None])
    return QLossResult(loss, g1, g2, y)


def _policy_loss_terms(policy: GaussianPolicy, twin: TwinQ,
                       sample: PolicySample, alpha: float, row_weights=None):
    """Loss value and (dL/da, dL/dlogpi) for mean[alpha logpi - min Q(s, a)].

    Gradient flows through the action into the Q inputs but not into the Q
    parameters.  Ties between heads resolve to head 1.  `row_weights`
    replaces the uniform 1/B weighting (used when a mixed batch is split by
    branch label); weights must already sum to 1 over the intended rows.
    """
    B = sample.actions.shape[0]
    q1, c1 = _q_forward(twin.q1, sample.states, sample.actions)
    q2, c2 = _q_forward(twin.q2, sample.states, sample.actions)
    pick1 = (q1 <= q2).astype(float)
    qmin = pick1 * q1 + (1.0 - pick1) * q2
    obs_dim = sample.states.shape[1]
    if row_weights is None:
        loss = float(np.mean(alpha * sample.log_probs - qmin))
        _, gin1 = mlp_backward(twin.q1, c1, (-pick1 / B)[:, None])
        _, gin2 = mlp_backward(twin.q2, c2, ((pick1 - 1.0) / B)[:, None])
        d_log_probs = np.full(B, alpha / B)
    else:
        w = row_weights
        loss = float(np.sum(w * (alpha * sample.log_probs - qmin)))
        _, gin1 = mlp_backward(twin.q1, c1, (-pick1 * w)[:, None])
        _, gin2 = mlp_backward(twin.q2, c2, ((pick1 - 1.0) * w)[:, None])
        d_log_probs = alpha * w
    d_actions = gin1[:, obs_dim:] + gin2[:, obs_dim:]
    return loss, d_actions, d_log_probs


def policy_loss(policy: GaussianPolicy, twin: TwinQ, states: np.ndarray,
                alpha: float, noise: np.ndarray):
    """Reparameterized policy objective and its parameter gradients."""
    if states.shape[0] == 0:
        raise UsageError("policy_loss needs a non-empty batch")
    sample = policy_forward_sample(policy, states, noise)
    loss, d_actions, d_log_probs = _policy_loss_terms(policy, twin, sample, alpha)
    grads = policy_backward(policy, sample, d_actions, d_log_probs)
    return loss, grads


def alpha_loss(temp: Temperature, log_probs: np.ndarray):
    """J = mean[-alpha logpi - alpha H0]; gradient w.r.t. log alpha.

    log pi is treated as constant, so the gradient equals the loss itself.
    """
    alpha = temp.alpha
    c = float(np.mean(log_probs)) + temp.target_entropy
    loss = -alpha * c
    return loss, loss


def alpha_adam_step(temp: Temperature, grad: float, lr: float) -> Temperature:
    """Scalar Adam step on log alpha; returns a fresh Temperature."""
    if not math.isfinite(grad):
        raise NumericError("non-finite temperature gradient; step refused")
    t = temp.t + 1
    m = 0.9 * temp.m + 0.1 * grad
    v = 0.999 * temp.v + 0.001 * grad * grad
    m_hat = m / (1.0 - 0.9**t)
    v_hat = v / (1.0 - 0.999**t)
    log_alpha = temp.log_alpha - lr * m_hat / (math.sqrt(v_hat) + 1e-8)
    return Temperature(log_alpha, temp.target_entropy, m, v, t)


@dataclass
class BranchStep:
    """Result of one Q + temperature + target update on a single branch."""

    sample: PolicySample
    batch: SacBatch
    q_loss: float
    alpha_loss: float
    mean_log_prob: float


def branch_update(policy: GaussianPolicy, twin: TwinQ, temp: Temperature,
                  batch: SacBatch, gamma: float, tau: float, lr: float,
                  rng: np.random.Generator, update_alpha: bool = True):
    """Gradient step on both Q heads, optional temperature step, target update.

    Mutates `twin` in place and returns (BranchStep, new Temperature).  The
    policy sample drawn here is reused by the policy update that follows.
    """
    d = policy.act_dim
    noise_next = rng.standard_normal((batch.size, d))
    qres = q_loss(twin, batch, policy, temp.alpha, gamma, noise_next)
    twin.q1, twin.adam_q1 = adam_step(twin.q1, qres.grads_q1, twin.adam_q1, lr)
    twin.q2, twin.adam_q2 = adam_step(twin.q2, qres.grads_q2, twin.adam_q2, lr)
    noise_cur = rng.standard_normal((batch.size, d))
    sample = policy_forward_sample(policy, batch.states, noise_cur)
    a_loss = math.nan
    if update_alpha:
        a_loss, a_grad = alpha_loss(temp, sample.log_probs)
        temp = alpha_adam_step(temp, a_grad, lr)
    twin.q1_target = polyak_update(twin.q1_target, twin.q1, tau)
    twin.q2_target = polyak_update(twin.q2_target, twin.q2, tau)
    step = BranchStep(sample, batch, qres.loss, a_loss,
                      float(np.mean(sample.log_probs)))
    return step, temp


def apply_policy_update(policy: GaussianPolicy, branch_terms, lr: float) -> float:
    """Adam step on the shared policy from one or more branch loss terms.

    `branch_terms` is a list of (twin, alpha, BranchStep, row_weights); each
    contributes the mean of [alpha logpi - min Q_k] over its own batch (or the
    row-weighted sum) and the branch gradients are summed.  Returns the
    composite loss value.
    """
    total_loss = 0.0
    total_grads = None
    for twin, alpha, step, row_weights in branch_terms:
        loss, d_actions, d_log_probs = _policy_loss_terms(
            policy, twin, step.sample, alpha, row_weights)
        grads = policy_backward(policy, step.sample, d_actions, d_log_probs)
        total_loss += loss
        if total_grads is None:
            total_grads = grads
        else:
            total_grads.flat += grads.flat
    if total_grads is None:
        raise UsageError("policy update needs at least one branch")
    policy.net, policy.adam = adam_step(policy.net, total_grads, policy.adam, lr)
    return total_loss


@dataclass
class SacAgent:
    """Plain SAC: one policy, one twin critic, one temperature."""

    policy: GaussianPolicy
    twin: TwinQ
    temp: Temperature


def make_sac_agent(obs_dim: int, act_dim: int, hidden, target_entropy: float,
                   seed: int) -> SacAgent:
    return SacAgent(
        make_policy(obs_dim, act_dim, hidden, seed),
        make_twin_q(obs_dim, act_dim, hidden, seed + 10),
        make_temperature(target_entropy),
    )


def sac_update_step(agent: SacAgent, replay: RingBuffer, batch_size: int,
                    gamma: float, tau: float, lr: float,
                    rng_sampler: np.random.Generator,
                    rng_update: np.random.Generator):
    """One full SAC gradient step; returns metrics, or None when underfilled.

    Order follows the single-branch training loop: critics, temperature,
    target averaging, then the policy.
    """
    if replay.fill < batch_size:
        return None
    batch = replay.sample(batch_size, rng_sampler)
    step, agent.temp = branch_update(agent.policy, agent.twin, agent.temp,
                                     batch, gamma, tau, lr, rng_update)
    pi_loss = apply_policy_update(
        agent.policy, [(agent.twin, agent.temp.alpha, step, None)], lr)
    return {
        "loss_q": step.q_loss,
        "loss_pi": pi_loss,
        "loss_alpha": step.alpha_loss,
        "alpha": agent.temp.alpha,
        "mean_log_prob": step.mean_log_prob,
    }
