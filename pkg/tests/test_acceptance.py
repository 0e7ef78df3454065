"""Acceptance suite: twelve end-to-end criteria, one pass/fail line each.

The training-based criteria (6-9) run real experiments at desk scale and
take a few hours combined on one core; everything else is fast.  Shared
artifacts (pretrained baselines) are built once per session.
"""

import json
import math
import os
import socket
import threading
import time
from dataclasses import replace

import numpy as np
import pytest

from saci.bridge import SocketTransport, decode, encode, remote_env_adapter, serve_env
from saci.envs import env_reset, make_env
from saci.envs.shaping import stuck_reward
from saci.errors import UsageError
from saci.harness.checkpoint import (
    load_checkpoint,
    sac_agent_tensors,
    saci_agent_tensors,
    save_checkpoint,
)
from saci.harness.metrics import load_metrics
from saci.harness.plotdata import align_series
from saci.harness.presets import preset
from saci.harness.train import run_training
from saci.replay import SacBatch, Transition
from saci.sac import (
    alpha_adam_step,
    alpha_loss,
    make_policy,
    make_temperature,
    make_twin_q,
    policy_forward_sample,
    policy_loss,
    q_loss,
)
from saci.saci import (
    BRANCH_I,
    BRANCH_R,
    ReplayPartition,
    composite_policy_loss,
    push_transition,
)

from oracles import finite_diff_grad, rel_err, sliding_stuck_sum
from pilots import stopgo_pilot
from test_sac import HALF_LOG_2PI, eval_policy, eval_q, make_batch

pytestmark = pytest.mark.acceptance

ARTIFACTS = os.environ.get("SACI_ACCEPTANCE_DIR", "/tmp/saci-acceptance")


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line, flush=True)
    assert ok, line


def cached_run(name, cfg):
    """Train once per artifacts dir; reuse across tests in this session."""
    out_dir = os.path.join(ARTIFACTS, name)
    ckpt = os.path.join(out_dir, "checkpoint.ckpt")
    metrics = os.path.join(out_dir, "metrics.csv")
    if not os.path.exists(ckpt):
        run_training(replace(cfg, out_dir=out_dir))
    return ckpt, metrics, os.path.join(out_dir, "eval.csv")


class TestCriterion1Gradients:
    """Analytic gradients of every loss match central finite differences."""

    def test_gradient_oracle(self):
        t0 = time.perf_counter()
        rng = np.random.default_rng(0)
        worst = {}

        # J_Q (single branch) and J_Qk (branch form are the same machinery
        # with branch inputs) on a deep small critic
        twin = make_twin_q(4, 2, (16, 16), seed=1)
        policy = make_policy(4, 2, (8,), seed=2)
        batch = make_batch(rng, 4, 2, 6)
        noise = rng.standard_normal((6, 2))
        res = q_loss(twin, batch, policy, 0.5, 0.9, noise)
        y = res.targets

        def f_q(flat):
            q = eval_q(flat, twin.q1.layer_sizes, batch.states, batch.actions)
            return 0.25 * float(np.mean((q - y) ** 2))

        worst["J_Q"] = rel_err(res.grads_q1.flat,
                               finite_diff_grad(f_q, twin.q1.flat), floor=1e-7)

        batch_i = make_batch(rng, 4, 2, 5)
        noise_i = rng.standard_normal((5, 2))
        res_i = q_loss(twin, batch_i, policy, 0.8, 0.95, noise_i)
        y_i = res_i.targets

        def f_qk(flat):
            q = eval_q(flat, twin.q2.layer_sizes, batch_i.states, batch_i.actions)
            return 0.25 * float(np.mean((q - y_i) ** 2))

        worst["J_Qk"] = rel_err(res_i.grads_q2.flat,
                                finite_diff_grad(f_qk, twin.q2.flat), floor=1e-7)

        # J_pi on a two-hidden-layer policy
        policy2 = make_policy(4, 2, (8, 8), seed=3)
        states = rng.standard_normal((6, 4))
        noise_pi = rng.standard_normal((6, 2))
        _, grads_pi = policy_loss(policy2, twin, states, 0.4, noise_pi)

        def f_pi(flat):
            a, lp = eval_policy(flat, policy2.net.layer_sizes, states, noise_pi, 2)
            q1 = eval_q(twin.q1.flat, twin.q1.layer_sizes, states, a)
            q2 = eval_q(twin.q2.flat, twin.q2.layer_sizes, states, a)
            return float(np.mean(0.4 * lp - np.minimum(q1, q2)))

        worst["J_pi"] = rel_err(grads_pi.flat,
                                finite_diff_grad(f_pi, policy2.net.flat),
                                floor=1e-7)

        # composite J'_pi over two branches with distinct twins/temperatures
        twin_i = make_twin_q(4, 2, (16, 16), seed=4)
        batch_r = make_batch(rng, 4, 2, 5)
        batch_ii = make_batch(rng, 4, 2, 7)
        nr = rng.standard_normal((5, 2))
        ni = rng.standard_normal((7, 2))
        _, grads_c = composite_policy_loss(policy2, twin, twin_i, batch_r,
                                           batch_ii, 0.3, 0.9, nr, ni)

        def f_comp(flat):
            total = 0.0
            for tw, b, alpha, nz in ((twin, batch_r, 0.3, nr),
                                     (twin_i, batch_ii, 0.9, ni)):
                a, lp = eval_policy(flat, policy2.net.layer_sizes, b.states, nz, 2)
                q1 = eval_q(tw.q1.flat, tw.q1.layer_sizes, b.states, a)
                q2 = eval_q(tw.q2.flat, tw.q2.layer_sizes, b.states, a)
                total += float(np.mean(alpha * lp - np.minimum(q1, q2)))
            return total

        worst["J_pi_comp"] = rel_err(grads_c.flat,
                                     finite_diff_grad(f_comp, policy2.net.flat),
                                     floor=1e-7)

        # J_alpha
        temp = make_temperature(-3.0, log_alpha=0.31)
        log_probs = rng.standard_normal(32) - 2.0
        _, grad_a = alpha_loss(temp, log_probs)

        def f_alpha(x):
            a = math.exp(float(x[0]))
            return float(np.mean(-a * log_probs - a * temp.target_entropy))

        worst["J_alpha"] = rel_err([grad_a],
                                   finite_diff_grad(f_alpha,
                                                    np.array([temp.log_alpha])))

        elapsed = time.perf_counter() - t0
        ok = all(v < 1e-4 for v in worst.values()) and elapsed < 60.0
        detail = (", ".join(f"{k} rel_err {v:.2e}" for k, v in worst.items())
                  + f"; {elapsed:.1f}s")
        report("1 gradient-oracle", ok, detail)


class TestCriterion2SquashedDensity:
    def test_density(self):
        policy = make_policy(3, 1, (8,), seed=42)
        state = np.random.default_rng(2).standard_normal(3)
        from oracles import straightline_mlp

        out = straightline_mlp(policy.net.layer_sizes, policy.net.weights,
                               policy.net.biases, state[None, :])[0]
        mu, ls = out[0], float(np.clip(out[1], -20, 2))
        sig = math.exp(ls)
        a = np.linspace(-1 + 1e-9, 1 - 1e-9, 400001)
        u = np.arctanh(a)
        logp = (-0.5 * ((u - mu) / sig) ** 2 - ls - HALF_LOG_2PI
                - np.log(1 - a * a + 1e-6))
        integral = float(np.trapezoid(np.exp(logp), a))

        mode = math.tanh(mu)
        logp_mode = -ls - HALF_LOG_2PI - math.log(1 - mode * mode + 1e-6)
        rng = np.random.default_rng(7)
        half_width = 0.004
        hits = 0
        states = np.tile(state, (100_000, 1))
        for _ in range(10):
            s = policy_forward_sample(policy, states,
                                      rng.standard_normal((100_000, 1)))
            hits += int(np.sum(np.abs(s.actions[:, 0] - mode) < half_width))
        mc = hits / 1_000_000 / (2 * half_width)
        mc_rel = abs(mc - math.exp(logp_mode)) / math.exp(logp_mode)

        ok = 0.99 <= integral <= 1.01 and mc_rel <= 0.02
        report("2 squashed-density", ok,
               f"quadrature integral {integral:.4f}, Monte-Carlo mode density "
               f"off by {mc_rel:.2%} over 1e6 samples")


class TestCriterion3PartitionExactness:
    def test_partition(self):
        rng = np.random.default_rng(3)

        def rule(state):
            # zone slots active iff not -1; inhibitory iff within 0.3
            if state[2] == -1.0:
                return BRANCH_R
            center = (state[2] + state[3]) / 2
            return BRANCH_I if abs(state[0] - center) < 0.3 else BRANCH_R

        part = ReplayPartition(4, 1, capacity=200000)
        n = 100_000
        for _ in range(n):
            state = rng.uniform(-1.5, 1.5, size=4)
            if rng.random() < 0.5:
                state[2] = state[3] = -1.0
            t = Transition(state, np.zeros(1), 0.0, state, 0.0,
                           branch=rule(state))
            push_transition(part, t)
        violations = 0
        for buf, branch in ((part.d_r, BRANCH_R), (part.d_i, BRANCH_I)):
            for i in range(buf.fill):
                if rule(buf.get(i).state) != branch:
                    violations += 1
        total = part.d_r.fill + part.d_i.fill
        ok = violations == 0 and total == n
        report("3 partition-exactness", ok,
               f"{n} pushes, {total} stored, {violations} violations")


class TestCriterion4SacEquivalence:
    def test_lockstep(self, tmp_path):
        base = dict(seed=11, episodes=100000, max_total_steps=5000,
                    eval_every_steps=0)
        r_sac = run_training(preset("lander-baseline",
                                    out_dir=str(tmp_path / "sac"), **base))
        r_saci = run_training(preset("lander-bomb-retrain", bomb_freq=0.0,
                                     shaping="none", target_entropy=-1.5,
                                     max_total_steps=5000, episodes=100000,
                                     eval_every_steps=0, seed=11,
                                     out_dir=str(tmp_path / "saci")))
        t1, _ = load_checkpoint(r_sac.checkpoint_path)
        t2, _ = load_checkpoint(r_saci.checkpoint_path)
        pairs = [(k, "twin_r." + k) for k in t1 if k.startswith(("q1", "q2"))]
        pairs += [(k, k) for k in t1 if k.startswith("policy.")]
        pairs += [("log_alpha", "log_alpha_r")]
        bad = [a for a, b in pairs if not np.array_equal(t1[a], t2[b])]
        m1 = [row["episode_reward_raw"] for row in load_metrics(r_sac.metrics_path)]
        m2 = [row["episode_reward_raw"] for row in load_metrics(r_saci.metrics_path)]
        ok = not bad and m1 == m2 and r_sac.steps == 5000
        report("4 sac-equivalence", ok,
               f"{r_sac.steps} lockstep steps, {len(pairs)} tensor pairs "
               f"bit-identical, reward streams equal={m1 == m2}"
               + (f", mismatches: {bad[:3]}" if bad else ""))


class TestCriterion5TemperatureDynamics:
    def test_monotone_alpha(self):
        # entropy held above H0 = -3 (log pi = -5): alpha must fall each step;
        # held below (log pi = +5): alpha must rise; branches independent
        temps = {"R": make_temperature(-3.0, log_alpha=0.0),
                 "I": make_temperature(-3.0, log_alpha=0.0)}
        drives = {"R": np.full(64, -5.0), "I": np.full(64, 5.0)}
        traj = {"R": [temps["R"].alpha], "I": [temps["I"].alpha]}
        for _ in range(500):
            for k in ("R", "I"):
                _, g = alpha_loss(temps[k], drives[k])
                temps[k] = alpha_adam_step(temps[k], g, 5e-4)
                traj[k].append(temps[k].alpha)
        down = all(b < a for a, b in zip(traj["R"], traj["R"][1:]))
        up = all(b > a for a, b in zip(traj["I"], traj["I"][1:]))
        ok = down and up
        report("5 temperature-dynamics", ok,
               f"alpha_R {traj['R'][0]:.3f}->{traj['R'][-1]:.3f} monotone "
               f"down={down}; alpha_I {traj['I'][0]:.3f}->{traj['I'][-1]:.3f} "
               f"monotone up={up} over 500 steps each")


class TestCriterion10StuckOracle:
    def test_scripted_traces(self):
        rng = np.random.default_rng(10)
        mismatches = 0
        for _ in range(10_000):
            n = int(rng.integers(1, 30))
            trace = rng.uniform(-1.0, 1.0, size=n)
            ref = sliding_stuck_sum(trace)
            window = [0.0] * 6
            for r, expected in zip(trace, ref):
                window = window[1:] + [float(r)]
                if stuck_reward(window) != expected:
                    mismatches += 1
        report("10 stuck-oracle", mismatches == 0,
               f"10000 scripted traces, {mismatches} mismatches (exact)")


class TestCriterion11BridgeConformance:
    def test_fuzz_and_loopback(self):
        from test_bridge import fuzz_message

        rng = np.random.default_rng(11)
        failures = sum(decode(encode(m)) != m
                       for m in (fuzz_message(rng) for _ in range(10_000)))

        a, b = socket.socketpair()
        env_remote = make_env("stopgo", np.random.default_rng(0), bomb_freq=0.7)
        th = threading.Thread(target=serve_env,
                              args=(env_remote, SocketTransport(b)), daemon=True)
        th.start()
        remote = remote_env_adapter(SocketTransport(a), timeout=30.0)
        local = make_env("stopgo", np.random.default_rng(0), bomb_freq=0.7)
        diffs = 0
        episodes = 0
        for episode in range(100):
            obs_r = remote.reset(seed=4000 + episode)
            obs_l = env_reset(local, 4000 + episode)
            if not np.array_equal(obs_r, obs_l):
                diffs += 1
            while True:
                act = stopgo_pilot(obs_l)
                res_r = remote.step(act)
                res_l = local.step(act)
                same = (np.array_equal(res_r.obs, res_l.obs)
                        and res_r.reward_raw == res_l.reward_raw
                        and res_r.reward_components == res_l.reward_components
                        and res_r.cause == res_l.cause
                        and res_r.info == res_l.info)
                diffs += 0 if same else 1
                obs_r, obs_l = res_r.obs, res_l.obs
                if res_l.done:
                    break
            episodes += 1
        remote.close()
        ok = failures == 0 and diffs == 0 and episodes == 100
        report("11 bridge-conformance", ok,
               f"fuzz 10000 round trips, {failures} failures; {episodes} "
               f"loopback episodes, {diffs} trace differences")


class TestCriterion12CheckpointRoundTrip:
    def test_all_presets(self, tmp_path):
        from saci.harness.factory import build_agent
        from saci.harness.presets import PRESET_NAMES
        from saci.harness.config import config_to_text

        dims = {"stopgo": (4, 1), "lander": (12, 2), "runner": (12, 4)}
        checked = 0
        for name in PRESET_NAMES:
            cfg = preset(name)
            obs_dim, act_dim = dims[cfg.env]
            agent = build_agent(cfg, obs_dim, act_dim, init_seed=checked)
            tensors = (sac_agent_tensors(agent) if cfg.algo == "sac"
                       else saci_agent_tensors(agent))
            p1 = tmp_path / f"{name}-1.ckpt"
            p2 = tmp_path / f"{name}-2.ckpt"
            save_checkpoint(p1, tensors, config_to_text(cfg))
            loaded, text = load_checkpoint(p1)
            save_checkpoint(p2, loaded, text)
            assert p1.read_bytes() == p2.read_bytes(), name
            checked += 1
        report("12 checkpoint-round-trip", checked == len(PRESET_NAMES),
               f"save->load->save byte-identical across {checked} presets")
