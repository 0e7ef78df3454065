import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saci.errors import ConfigError, NumericError, ShapeError
from saci.numcore import (
    AdamState,
    adam_init,
    adam_step,
    mlp_backward,
    mlp_forward,
    mlp_init,
    mlp_zeros,
    n_params,
    params_from_flat,
    polyak_update,
)

from oracles import finite_diff_grad, hand_adam_step, rel_err, straightline_mlp


def random_params(layer_sizes, seed, scale=1.0):
    params = mlp_init(layer_sizes, seed)
    if scale != 1.0:
        params.flat[...] *= scale
    return params


class TestInit:
    def test_biases_zero(self):
        p = mlp_init([2, 1], seed=3)
        assert np.array_equal(p.biases[0], [0.0])

    def test_deterministic(self):
        a = mlp_init([4, 256, 2], seed=7)
        b = mlp_init([4, 256, 2], seed=7)
        assert np.array_equal(a.flat, b.flat)

    def test_fan_in_bound(self):
        p = mlp_init([9, 256, 256, 1], seed=11)
        # second and third layers have fan-in 256 -> bound 1/16
        for w in p.weights[1:]:
            assert np.max(np.abs(w)) <= 1.0 / 16.0
        assert np.max(np.abs(p.weights[0])) <= 1.0 / 3.0

    def test_rejects_bad_sizes(self):
        with pytest.raises(ConfigError):
            mlp_init([4], seed=0)
        with pytest.raises(ConfigError):
            mlp_init([4, 0, 2], seed=0)

    def test_views_share_flat(self):
        p = mlp_init([3, 5, 2], seed=0)
        p.flat[...] = 1.0
        assert np.all(p.weights[0] == 1.0)
        assert np.all(p.biases[1] == 1.0)
        assert p.flat.size == n_params([3, 5, 2])


class TestForward:
    def test_zero_net_zero_output(self):
        p = mlp_zeros([3, 4, 2])
        x = np.random.default_rng(0).standard_normal((5, 3))
        out, _ = mlp_forward(p, x)
        assert np.array_equal(out, np.zeros((5, 2)))

    def test_linear_case(self):
        p = mlp_zeros([2, 2])
        p.weights[0][...] = np.array([[1.0, 2.0], [3.0, 4.0]])
        p.biases[0][...] = np.array([0.5, -0.5])
        x = np.array([[1.0, 1.0]])
        out, _ = mlp_forward(p, x)
        assert np.allclose(out, [[3.5, 6.5]], atol=0, rtol=0)

    def test_matches_straightline_oracle(self):
        p = random_params([4, 7, 5, 3], seed=21)
        x = np.random.default_rng(1).standard_normal((6, 4))
        out, _ = mlp_forward(p, x)
        ref = straightline_mlp(p.layer_sizes, p.weights, p.biases, x)
        assert np.array_equal(out, ref)

    def test_deterministic_bitwise(self):
        p = random_params([4, 16, 1], seed=2)
        x = np.random.default_rng(2).standard_normal((8, 4))
        out1, _ = mlp_forward(p, x)
        out2, _ = mlp_forward(p, x)
        assert np.array_equal(out1, out2)

    def test_shape_error(self):
        p = mlp_zeros([3, 2])
        with pytest.raises(ShapeError):
            mlp_forward(p, np.zeros((4, 5)))


class TestBackward:
    def test_zero_grad_output(self):
        p = random_params([3, 6, 2], seed=5)
        x = np.random.default_rng(5).standard_normal((4, 3))
        _, cache = mlp_forward(p, x)
        grads, gin = mlp_backward(p, cache, np.zeros((4, 2)))
        assert np.array_equal(grads.flat, np.zeros_like(grads.flat))
        assert np.array_equal(gin, np.zeros((4, 3)))

    def test_finite_difference_scalar_output(self):
        p = random_params([4, 8, 6, 1], seed=9)
        x = np.random.default_rng(9).standard_normal((3, 4))

        def loss_at(flat):
            q = params_from_flat(p.layer_sizes, flat)
            out = straightline_mlp(q.layer_sizes, q.weights, q.biases, x)
            return float(out.sum())

        _, cache = mlp_forward(p, x)
        grads, _ = mlp_backward(p, cache, np.ones((3, 1)))
        ref = finite_diff_grad(loss_at, p.flat)
        assert rel_err(grads.flat, ref, floor=1e-6) < 1e-6

    def test_input_gradient_finite_difference(self):
        p = random_params([3, 5, 1], seed=13)
        x0 = np.random.default_rng(13).standard_normal(3)

        def f(xflat):
            return float(straightline_mlp(p.layer_sizes, p.weights, p.biases,
                                          xflat[None, :])[0, 0])

        _, cache = mlp_forward(p, x0[None, :])
        _, gin = mlp_backward(p, cache, np.ones((1, 1)))
        assert rel_err(gin[0], finite_diff_grad(f, x0), floor=1e-6) < 1e-6

    def test_batch_grad_is_sum_of_single_sample_grads(self):
        p = random_params([4, 8, 2], seed=17)
        x = np.random.default_rng(17).standard_normal((2, 4))
        go = np.random.default_rng(18).standard_normal((2, 2))
        _, cache = mlp_forward(p, x)
        batch_grads, _ = mlp_backward(p, cache, go)
        total = np.zeros_like(p.flat)
        for i in range(2):
            _, c = mlp_forward(p, x[i : i + 1])
            g, _ = mlp_backward(p, c, go[i : i + 1])
            total += g.flat
        assert rel_err(batch_grads.flat, total, floor=1e-9) < 1e-12

    def test_stale_cache_rejected(self):
        p = random_params([3, 4, 1], seed=1)
        other = random_params([3, 5, 1], seed=1)
        x = np.zeros((2, 3))
        _, cache = mlp_forward(other, x)
        with pytest.raises(ShapeError):
            mlp_backward(p, cache, np.zeros((2, 1)))


class TestAdam:
    def test_zero_grads_no_change(self):
        p = random_params([2, 3, 1], seed=0)
        g = mlp_zeros(p.layer_sizes)
        new_p, state = adam_step(p, g, adam_init(p), lr=1e-3)
        assert np.array_equal(new_p.flat, p.flat)
        assert state.t == 1

    def test_first_step_magnitude(self):
        # bias-corrected first step moves by ~lr against the gradient sign
        p = params_from_flat([1, 1], np.array([1.0, 0.0]))
        g = params_from_flat([1, 1], np.array([1.0, 0.0]))
        new_p, _ = adam_step(p, g, adam_init(p), lr=0.001)
        assert new_p.flat[0] == pytest.approx(1.0 - 0.001, abs=1e-8)

    def test_matches_hand_adam_over_steps(self):
        rng = np.random.default_rng(3)
        p = random_params([3, 4, 2], seed=3)
        state = adam_init(p)
        x, m, v, t = p.flat.copy(), np.zeros_like(p.flat), np.zeros_like(p.flat), 0
        for _ in range(5):
            gflat = rng.standard_normal(p.flat.size)
            g = params_from_flat(p.layer_sizes, gflat)
            p, state = adam_step(p, g, state, lr=0.01)
            x, m, v, t = hand_adam_step(x, gflat, m, v, t, lr=0.01)
        assert rel_err(p.flat, x, floor=1e-9) < 1e-12

    def test_deterministic(self):
        p = random_params([2, 2], seed=4)
        g = random_params([2, 2], seed=5)
        a1, _ = adam_step(p, g, adam_init(p), lr=1e-3)
        a2, _ = adam_step(p, g, adam_init(p), lr=1e-3)
        assert np.array_equal(a1.flat, a2.flat)

    def test_refuses_non_finite(self):
        p = random_params([2, 2], seed=4)
        g = params_from_flat([2, 2], np.array([np.nan] * 6))
        with pytest.raises(NumericError):
            adam_step(p, g, adam_init(p), lr=1e-3)
        assert np.all(np.isfinite(p.flat))


class TestPolyak:
    def test_tau_one_copies_online(self):
        t = random_params([2, 3, 1], seed=6)
        o = random_params([2, 3, 1], seed=7)
        assert np.array_equal(polyak_update(t, o, 1.0).flat, o.flat)

    def test_tau_zero_keeps_target(self):
        t = random_params([2, 3, 1], seed=6)
        o = random_params([2, 3, 1], seed=7)
        assert np.array_equal(polyak_update(t, o, 0.0).flat, t.flat)

    def test_midpoint(self):
        t = params_from_flat([1, 1], np.array([0.0, 0.0]))
        o = params_from_flat([1, 1], np.array([2.0, 2.0]))
        assert np.array_equal(polyak_update(t, o, 0.5).flat, [1.0, 1.0])

    @settings(max_examples=50, deadline=None)
    @given(tau=st.floats(0.0, 1.0), seed=st.integers(0, 1000))
    def test_contraction_toward_online(self, tau, seed):
        t = random_params([2, 4, 1], seed=seed)
        o = random_params([2, 4, 1], seed=seed + 1)
        new = polyak_update(t, o, tau)
        lhs = np.abs(new.flat - o.flat)
        rhs = (1.0 - tau) * np.abs(t.flat - o.flat)
        assert np.all(lhs <= rhs + 1e-12)
