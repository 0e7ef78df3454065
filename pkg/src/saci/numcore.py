"""Dense numerical core: fixed-topology MLPs with exact reverse-mode gradients.

Networks are plain feed-forward ReLU stacks over float64 numpy arrays.  All
parameters of a network live in a single flat vector; the per-layer weight and
bias arrays are views into it, so optimizer and target-update passes are a
handful of whole-vector operations regardless of depth.

Functions here are pure: they never mutate their inputs and return fresh
parameter/state objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@lru_cache(maxsize=None)
def _layout(layer_sizes):
    """Offsets of each weight matrix and bias vector inside the flat vector."""
    spans = []
    off = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w_span = (off, off + fan_out * fan_in)
        off = w_span[1]
        b_span = (off, off + fan_out)
        off = b_span[1]
        spans.append((w_span, b_span, fan_out, fan_in))
    return tuple(spans), off


def n_params(layer_sizes) -> int:
    return _layout(tuple(int(s) for s in layer_sizes))[1]


@dataclass
class MlpParams:
    """All weights of one ReLU MLP (identity output layer).

    `weights[i]` has shape (layer_sizes[i+1], layer_sizes[i]) and `biases[i]`
    length layer_sizes[i+1]; both are views into `flat`.
    """

    layer_sizes: tuple
    flat: np.ndarray
    weights: list
    biases: list

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpParams":
        return params_from_flat(self.layer_sizes, self.flat.copy())


def params_from_flat(layer_sizes, flat: np.ndarray) -> MlpParams:
    layer_sizes = tuple(int(s) for s in layer_sizes)
    spans, total = _layout(layer_sizes)
    if flat.shape != (total,):
        raise ShapeError(f"flat vector has {flat.shape}, layout needs ({total},)")
    weights, biases = [], []
    for (w0, w1), (b0, b1), fan_out, fan_in in spans:
        weights.append(flat[w0:w1].reshape(fan_out, fan_in))
        biases.append(flat[b0:b1])
    return MlpParams(layer_sizes, flat, weights, biases)


def mlp_zeros(layer_sizes) -> MlpParams:
    return params_from_flat(layer_sizes, np.zeros(n_params(layer_sizes)))


def mlp_init(layer_sizes, seed: int) -> MlpParams:
    """Uniform fan-in initialization: W ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], b = 0."""
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if len(layer_sizes) < 2:
        raise ConfigError(f"need at least input and output layer, got {layer_sizes}")
    if any(s < 1 for s in layer_sizes):
        raise ConfigError(f"zero-sized layer in {layer_sizes}")
    rng = np.random.default_rng(seed)
    params = mlp_zeros(layer_sizes)
    for w in params.weights:
        bound = 1.0 / np.sqrt(w.shape[1])
        w[...] = rng.uniform(-bound, bound, size=w.shape)
    return params


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations of one forward pass."""

    layer_sizes: tuple
    batch: int
    layer_inputs: list  # input to layer i (post-activation of layer i-1)
    pre_acts: list      # z_i = layer_inputs[i] @ W_i.T + b_i


def mlp_forward(params: MlpParams, x: np.ndarray):
    """Evaluate the network on a batch. Returns (output, cache).

    x has shape (batch, in_dim); hidden layers apply max(0, .), the output
    layer is linear.
    """
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ShapeError(f"input {x.shape} incompatible with in_dim {params.in_dim}")
    n_layers = len(params.weights)
    layer_inputs = []
    pre_acts = []
    h = x
    for i in range(n_layers):
        layer_inputs.append(h)
        z = h @ params.weights[i].T + params.biases[i]
        pre_acts.append(z)
        h = np.maximum(z, 0.0) if i < n_layers - 1 else z
    cache = ForwardCache(params.layer_sizes, x.shape[0], layer_inputs, pre_acts)
    return h, cache


def mlp_backward(params: MlpParams, cache: ForwardCache, grad_output: np.ndarray):
    """Exact reverse-mode gradients of sum(output * grad_output) over the batch.

    Returns (param_grads, grad_input) with param_grads shaped like `params`.
    The ReLU subgradient at exactly 0 is 0.
    """
    if cache.layer_sizes != params.layer_sizes:
        raise ShapeError("cache does not match these parameters")
    if grad_output.shape != (cache.batch, params.out_dim):
        raise ShapeError(
            f"grad_output {grad_output.shape} != ({cache.batch}, {params.out_dim})"
        )
    grads = mlp_zeros(params.layer_sizes)
    g = grad_output
    for i in range(len(params.weights) - 1, -1, -1):
        grads.weights[i][...] = g.T @ cache.layer_inputs[i]
        grads.biases[i][...] = g.sum(axis=0)
        g = g @ params.weights[i]
        if i > 0:
            g = g * (cache.pre_acts[i - 1] > 0.0)
    return grads, g


@dataclass
class AdamState:
    """First/second moment accumulators over the flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(params: MlpParams) -> AdamState:
    return AdamState(np.zeros_like(params.flat), np.zeros_like(params.flat), 0)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float):
    """One bias-corrected Adam step. Returns (new_params, new_state)."""
    if grads.layer_sizes != params.layer_sizes:
        raise ShapeError("gradient shapes do not match parameters")
    g = grads.flat
    if not np.all(np.isfinite(g)):
        raise NumericError("non-finite gradients; step refused")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * (g * g)
    m_hat = m / (1.0 - ADAM_BETA1**t)
    v_hat = v / (1.0 - ADAM_BETA2**t)
    new_flat = params.flat - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return params_from_flat(params.layer_sizes, new_flat), AdamState(m, v, t)


def polyak_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """target' = (1 - tau) * target + tau * online, elementwise."""
    if target.layer_sizes != online.layer_sizes:
        raise ShapeError("target and online networks have different shapes")
    new_flat = (1.0 - tau) * target.flat + tau * online.flat
    return params_from_flat(target.layer_sizes, new_flat)
