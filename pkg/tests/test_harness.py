import csv
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from saci.errors import CheckpointError, ConfigError, UsageError
from saci.harness.checkpoint import (
    load_checkpoint,
    sac_agent_tensors,
    saci_agent_tensors,
    save_checkpoint,
)
from saci.harness.config import (
    TrainConfig,
    config_from_text,
    config_to_text,
    load_config,
    save_config,
)
from saci.harness.evaluate import evaluate_checkpoint
from saci.harness.metrics import load_metrics
from saci.harness.plotdata import export_plot_data, render_comparison
from saci.harness.presets import PRESET_NAMES, preset
from saci.harness.sweep import sweep
from saci.harness.train import derive_streams, run_training
from saci.sac import make_sac_agent
from saci.saci import make_inhibitory_policy, make_saci_agent


def tiny_config(tmp_path, name="stopgo-saci", **overrides):
    defaults = dict(episodes=6, max_total_steps=800, eval_every_steps=0,
                    out_dir=str(tmp_path / "run"))
    defaults.update(overrides)
    return preset(name, **defaults)


class TestConfig:
    def test_defaults_follow_hyperparameter_table(self):
        cfg = TrainConfig()
        assert cfg.lr == 5e-4
        assert cfg.gamma == 0.99
        assert cfg.tau == 1e-3
        assert cfg.target_entropy == -3.0
        assert cfg.hidden_units == 256
        assert cfg.replay_capacity == 1_000_000

    def test_text_round_trip(self, tmp_path):
        cfg = preset("runner-mixed", seed=17)
        path = tmp_path / "cfg.txt"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_sections_per_module(self):
        text = config_to_text(TrainConfig())
        for section in ("[run]", "[sac]", "[saci]", "[envs]"):
            assert section in text

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_text("[run]\nwarp_factor = 9\n")

    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            TrainConfig(algo="ddpg").validate()
        with pytest.raises(ConfigError):
            TrainConfig(gamma=1.5).validate()

    def test_rule_defaults(self):
        assert TrainConfig(env="stopgo").rule_name() == "stopgo_proximity"
        assert TrainConfig(env="lander", shaping="proxy").rule_name() == "lander_proximity"
        assert TrainConfig(env="lander", shaping="conservative").rule_name() == "lander_conservative"
        assert TrainConfig(env="lander", shaping="none").rule_name() == "bomb_present"
        assert TrainConfig(env="runner").rule_name() == "runner_stuck"

    def test_all_presets_valid(self):
        for name in PRESET_NAMES:
            preset(name).validate()


class TestCheckpoint:
    def test_sac_round_trip_bit_identical(self, tmp_path):
        agent = make_sac_agent(4, 2, (16,), -2.0, seed=0)
        tensors = sac_agent_tensors(agent)
        p1 = tmp_path / "a.ckpt"
        p2 = tmp_path / "b.ckpt"
        save_checkpoint(p1, tensors, "config text")
        loaded, text = load_checkpoint(p1)
        assert text == "config text"
        save_checkpoint(p2, loaded, text)
        assert p1.read_bytes() == p2.read_bytes()
        for name, arr in tensors.items():
            assert np.array_equal(loaded[name], arr)

    def test_saci_tensor_names(self, tmp_path):
        ip = make_inhibitory_policy(4, (8,), "hard_switch", 0, seed=1)
        agent = make_saci_agent(4, 2, (8,), -2.0, seed=0, inhibitory=ip)
        tensors = saci_agent_tensors(agent)
        assert "policy.w0" in tensors
        assert "twin_r.q1.w0" in tensors
        assert "twin_i.q2_target.b1" in tensors
        assert "log_alpha_r" in tensors and "log_alpha_i" in tensors
        assert "pi_i.policy.w0" in tensors and "pi_i.log_alpha" in tensors

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(CheckpointError, match="magic"):
            load_checkpoint(path)

    def test_truncation_rejected(self, tmp_path):
        agent = make_sac_agent(3, 1, (8,), -1.0, seed=0)
        path = tmp_path / "t.ckpt"
        save_checkpoint(path, sac_agent_tensors(agent), "")
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(CheckpointError, match="truncated"):
            load_checkpoint(path)


class TestTraining:
    def test_same_seed_identical_metrics_files(self, tmp_path):
        r1 = run_training(tiny_config(tmp_path / "a"))
        r2 = run_training(tiny_config(tmp_path / "b"))
        assert (open(r1.metrics_path).read().splitlines()[1:]
                == open(r2.metrics_path).read().splitlines()[1:])

    def test_avg100_recomputable_from_episode_rewards(self, tmp_path):
        r = run_training(tiny_config(tmp_path, episodes=12,
                                     max_total_steps=2500))
        rows = load_metrics(r.metrics_path)
        rewards = []
        for row in rows:
            rewards.append(row["episode_reward_raw"])
            window = rewards[-100:]
            assert row["avg100"] == pytest.approx(sum(window) / len(window),
                                                  abs=0, rel=0)

    def test_checkpoint_on_schedule_matches_shorter_run(self, tmp_path):
        cfg_long = tiny_config(tmp_path / "long", episodes=8,
                               max_total_steps=0, checkpoint_every=4)
        r_long = run_training(cfg_long)
        cfg_short = tiny_config(tmp_path / "short", episodes=4,
                                max_total_steps=0)
        r_short = run_training(cfg_short)
        t_mid, _ = load_checkpoint(os.path.join(cfg_long.out_dir,
                                                "checkpoint_ep4.ckpt"))
        t_short, _ = load_checkpoint(r_short.checkpoint_path)
        for name in t_short:
            assert np.array_equal(t_mid[name], t_short[name]), name

    def test_sampler_stream_does_not_touch_env_until_updates(self, tmp_path):
        # batch size above the step budget: no updates ever happen, so a
        # different sampler stream cannot change anything
        base = tiny_config(tmp_path / "x", episodes=4, max_total_steps=300)
        base.batch_size = 100000
        r1 = run_training(base)
        rows1 = load_metrics(r1.metrics_path)

        import saci.harness.factory as factory

        orig = factory.derive_streams

        def tweaked(master_seed):
            streams = orig(master_seed)
            streams["sampler"] = np.random.default_rng(999)
            return streams

        import saci.harness.train as train_mod

        train_mod.derive_streams = tweaked
        try:
            base2 = tiny_config(tmp_path / "y", episodes=4, max_total_steps=300)
            base2.batch_size = 100000
            r2 = run_training(base2)
        finally:
            train_mod.derive_streams = orig
        rows2 = load_metrics(r2.metrics_path)
        assert [r["episode_reward_raw"] for r in rows1] == \
               [r["episode_reward_raw"] for r in rows2]

    def test_run_writes_config_snapshot(self, tmp_path):
        cfg = tiny_config(tmp_path)
        run_training(cfg)
        snap = load_config(os.path.join(cfg.out_dir, "config.txt"))
        assert snap == cfg

    def test_loss_columns_present_for_saci(self, tmp_path):
        r = run_training(tiny_config(tmp_path, episodes=10,
                                     max_total_steps=2000))
        rows = load_metrics(r.metrics_path)
        assert any(not math.isnan(row["loss_q_r"]) for row in rows)
        assert any(not math.isnan(row["loss_pi"]) for row in rows)


class TestEvaluate:
    def test_checkpoint_evaluation(self, tmp_path):
        cfg = tiny_config(tmp_path, episodes=5, max_total_steps=700)
        r = run_training(cfg)
        summary = evaluate_checkpoint(r.checkpoint_path, n_episodes=5, seed=1)
        assert summary["episodes"] == 5
        assert 0.0 <= summary["success_rate"] <= 1.0
        assert set(summary["cause_counts"]) <= {"landed", "crashed", "hit_bomb",
                                                "fell", "finished", "timeout"}

    def test_zero_episodes_rejected(self, tmp_path):
        cfg = tiny_config(tmp_path, episodes=4, max_total_steps=500)
        r = run_training(cfg)
        with pytest.raises(UsageError):
            evaluate_checkpoint(r.checkpoint_path, n_episodes=0)

    def test_untrained_policy_near_zero_success(self, tmp_path):
        cfg = tiny_config(tmp_path, episodes=2, max_total_steps=200)
        r = run_training(cfg)
        summary = evaluate_checkpoint(r.checkpoint_path, n_episodes=10, seed=2)
        assert summary["success_rate"] <= 0.2


class TestSweep:
    def test_grid_cardinality_and_files(self, tmp_path):
        template = tiny_config(tmp_path, episodes=3, max_total_steps=250)
        cells = sweep(template, {"bomb_freq": [0.25, 0.75]}, seeds=2,
                      out_dir=str(tmp_path / "sweep"))
        assert len(cells) == 4
        names = {c.name for c in cells}
        assert "bomb_freq=0.25_seed0" in names
        assert "bomb_freq=0.75_seed1" in names
        with open(tmp_path / "sweep" / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        for row in rows:
            assert os.path.exists(row["metrics_path"])
            float(row["final_avg100"])  # parses back
        with open(tmp_path / "sweep" / "matrix.csv") as fh:
            matrix = list(csv.DictReader(fh))
        assert len(matrix) == 2
        assert all(int(r["seeds"]) == 2 for r in matrix)

    def test_ablation_grid(self, tmp_path):
        template = tiny_config(tmp_path, episodes=2, max_total_steps=150)
        cells = sweep(template, {"episodic_memory": [True, False],
                                 "dual_alpha": [True, False]}, seeds=1,
                      out_dir=str(tmp_path / "ab"))
        assert len(cells) == 4


class TestPlotData:
    def _fake_metrics(self, path, steps, values):
        from saci.harness.metrics import METRIC_COLUMNS

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(METRIC_COLUMNS)
            for i, (s, v) in enumerate(zip(steps, values)):
                row = [i + 1, s, "go", 10, repr(float(v)), repr(float(v)),
                       "0.1", "0.1", "nan", "nan", "nan", "nan", "nan",
                       0, 0, "finished", 0, 0, 0, 0, i + 1, 0]
                writer.writerow(row)

    def test_single_file_mean_is_values_std_zero(self, tmp_path):
        p = tmp_path / "m.csv"
        self._fake_metrics(p, [10, 20, 30], [1.0, 2.0, 3.0])
        grid, mean, std = export_plot_data([p], str(tmp_path / "out"))
        assert np.array_equal(grid, [10, 20, 30])
        assert np.array_equal(mean, [1.0, 2.0, 3.0])
        assert np.array_equal(std, [0.0, 0.0, 0.0])
        assert (tmp_path / "out.csv").exists()
        assert (tmp_path / "out.png").exists()

    def test_two_identical_files_zero_std(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (p1, p2):
            self._fake_metrics(p, [10, 20, 30], [5.0, 6.0, 7.0])
        _, mean, std = export_plot_data([p1, p2], str(tmp_path / "out"))
        assert np.array_equal(std, [0.0, 0.0, 0.0])

    def test_five_seed_mean_std_against_hand_computation(self, tmp_path):
        rng = np.random.default_rng(0)
        steps = [100, 200, 300, 400]
        data = rng.normal(size=(5, 4))
        paths = []
        for k in range(5):
            p = tmp_path / f"s{k}.csv"
            self._fake_metrics(p, steps, data[k])
            paths.append(p)
        grid, mean, std = export_plot_data(paths, str(tmp_path / "out"))
        for j in (0, 2, 3):
            assert mean[j] == pytest.approx(np.mean(data[:, j]))
            assert std[j] == pytest.approx(np.std(data[:, j]))

    def test_mismatched_grids_resample_to_coarsest(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        self._fake_metrics(p1, [10, 20, 30, 40], [1, 2, 3, 4])
        self._fake_metrics(p2, [10, 25, 40], [10, 25, 40])
        grid, mean, _ = export_plot_data([p1, p2], str(tmp_path / "out"))
        assert len(grid) == 3  # the coarser grid wins
        # linear interpolation of series 1 onto step 25 gives 2.5
        assert mean[1] == pytest.approx((2.5 + 25) / 2)

    def test_comparison_figure(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        self._fake_metrics(p1, [10, 20], [1, 2])
        self._fake_metrics(p2, [10, 20], [3, 4])
        render_comparison({"a": [p1], "b": [p2]}, str(tmp_path / "cmp"))
        assert (tmp_path / "cmp.png").exists()
        assert (tmp_path / "cmp.csv").exists()


class TestSeeding:
    def test_streams_are_independent_and_deterministic(self):
        s1 = derive_streams(42)
        s2 = derive_streams(42)
        for name in ("env", "action", "update", "sampler", "init"):
            assert s1[name].random() == s2[name].random()
        s3 = derive_streams(43)
        assert s3["env"].random() != derive_streams(42)["env"].random()


class TestCli:
    def _run(self, *args):
        from saci.harness.cli import main

        return main(list(args))

    def test_train_and_eval_flow(self, tmp_path, capsys):
        out = tmp_path / "cli_run"
        code = self._run("train", "--preset", "stopgo-saci", "--seed", "1",
                         "--episodes", "3", "--out", str(out),
                         "--set", "max_total_steps=300",
                         "--set", "eval_every_steps=0", "--log-every", "0")
        assert code == 0
        captured = capsys.readouterr()
        assert "checkpoint:" in captured.out
        code = self._run("eval", "--load", str(out / "checkpoint.ckpt"),
                         "--episodes", "3")
        assert code == 0
        assert "success rate" in capsys.readouterr().out

    def test_usage_errors_exit_1(self, capsys):
        assert self._run("train") == 1
        assert self._run("train", "--preset", "stopgo-saci",
                         "--set", "nonsense=1") == 1
        assert self._run("nonexistent-verb") == 1

    def test_missing_checkpoint_exit_2(self, capsys):
        assert self._run("eval", "--load", "/nonexistent/x.ckpt") == 2

    def test_export_plot_cli(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path, episodes=4, max_total_steps=400)
        r = run_training(cfg)
        code = self._run("export-plot", r.metrics_path, "--out",
                         str(tmp_path / "plot"))
        assert code == 0
        assert (tmp_path / "plot.png").exists()
        assert (tmp_path / "plot.csv").exists()

    def test_console_script_entry(self):
        proc = subprocess.run([sys.executable, "-m", "saci.harness.cli",
                               "train", "--preset", "nope"],
                              capture_output=True, text=True)
        assert proc.returncode == 1
