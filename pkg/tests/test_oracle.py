"""Ideal attention references, cross-checked against a brute-force loop."""

import math

import numpy as np
import pytest

from gcattn.oracle import OracleConfig, ideal_attention, ideal_decayed_attention

# frozen output of an explicit double loop (seed 7, dim 3, window 2, relu)
FROZEN = np.array([
    [0.0, 0.0, 0.0],
    [-2.31114787, 2.39194423, -2.1661036],
    [0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
    [-0.01703062, 0.0168419, 0.00972448],
])


def _streams(seed, steps, dim):
    rng = np.random.default_rng(seed)
    return tuple(rng.normal(size=(steps, dim)) for _ in range(3))


def test_matches_frozen_reference():
    q, k, v = _streams(7, 5, 3)
    cfg = OracleConfig(dim=3, window=2, activation="relu", scale=True)
    np.testing.assert_allclose(ideal_attention(q, k, v, cfg), FROZEN, atol=1e-8)


def _brute_force(q, k, v, window, activation, scale):
    steps, dim = q.shape
    out = np.zeros((steps, dim))
    for t in range(steps):
        lo = max(0, t - window + 1)
        scores = np.array([q[t] @ k[j] for j in range(lo, t + 1)])
        if scale:
            scores = scores / math.sqrt(dim)
        if activation == "relu":
            weights = np.maximum(scores, 0.0)
        else:
            weights = np.exp(scores - scores.max())
            weights = weights / weights.sum()
        for offset, j in enumerate(range(lo, t + 1)):
            out[t] += weights[offset] * v[j]
    return out


@pytest.mark.parametrize("window,activation", [(1, "relu"), (3, "relu"),
                                               (8, "relu"), (3, "softmax")])
def test_matches_brute_force(window, activation):
    q, k, v = _streams(21, 10, 4)
    cfg = OracleConfig(dim=4, window=window, activation=activation, scale=True)
    got = ideal_attention(q, k, v, cfg)
    want = _brute_force(q, k, v, window, activation, scale=True)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_unscaled_scores():
    q, k, v = _streams(3, 6, 4)
    cfg = OracleConfig(dim=4, window=3, activation="relu", scale=False)
    got = ideal_attention(q, k, v, cfg)
    want = _brute_force(q, k, v, 3, "relu", scale=False)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_decay_ages_keys_and_values():
    q, k, v = _streams(5, 6, 4)
    cfg = OracleConfig(dim=4, window=4, activation="relu", scale=True)
    tau, dt = 1e-3, 65e-9
    got = ideal_decayed_attention(q, k, v, cfg, tau=tau, dt=dt)
    out = np.zeros_like(q)
    for t in range(6):
        lo = max(0, t - 3)
        for j in range(lo, t + 1):
            fade = math.exp(-(t - j) * dt / tau)
            s = (q[t] @ (fade * k[j])) / 2.0
            out[t] += max(s, 0.0) * (fade * v[j])
    np.testing.assert_allclose(got, out, atol=1e-12)


def test_infinite_tau_reduces_to_plain():
    q, k, v = _streams(9, 8, 4)
    cfg = OracleConfig(dim=4, window=4, activation="relu", scale=True)
    got = ideal_decayed_attention(q, k, v, cfg, tau=math.inf, dt=65e-9)
    np.testing.assert_allclose(got, ideal_attention(q, k, v, cfg), atol=0)


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(dim=0, window=2)
    with pytest.raises(ValueError):
        OracleConfig(dim=2, window=0)
    with pytest.raises(ValueError):
        OracleConfig(dim=2, window=2, activation="gelu")
