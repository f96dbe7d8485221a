"""Ideal-arithmetic sliding-window attention, the reference for comparisons.

No quantization, no converters, no tiles: plain floating-point attention over
the most recent `window` tokens, with either elementwise ReLU scoring (the
activation the hardware realizes for free) or a conventional softmax. The
decayed variant additionally ages each cached key/value pair by the
exponential retention factor it would have suffered in the analog arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OracleConfig:
    """dim: token vector length. window: tokens attended, current inclusive.

    activation: "relu" or "softmax", applied to the score row.
    scale: divide scores by sqrt(dim) before the activation.
    """

    dim: int
    window: int
    activation: str = "relu"
    scale: bool = True

    def __post_init__(self):
        if self.dim < 1 or self.window < 1:
            raise ValueError("dim and window must be >= 1")
        if self.activation not in ("relu", "softmax"):
            raise ValueError(f"unknown activation {self.activation!r}")


def _check_streams(q_seq, k_seq, v_seq, dim):
    q, k, v = (np.asarray(a, dtype=float) for a in (q_seq, k_seq, v_seq))
    if not (q.shape == k.shape == v.shape):
        raise ValueError(f"stream shapes differ: {q.shape}, {k.shape}, {v.shape}")
    if q.ndim != 2 or q.shape[1] != dim:
        raise ValueError(f"expected (steps, {dim}) streams, got {q.shape}")
    return q, k, v


def ideal_attention(q_seq, k_seq, v_seq, config: OracleConfig) -> np.ndarray:
    """Per-step attention over the trailing window, including the current token.

    Token t attends to tokens max(0, t - window + 1) .. t. Returns the
    (steps, dim) output matrix.
    """
    q, k, v = _check_streams(q_seq, k_seq, v_seq, config.dim)
    return _attend(q, k, v, config, ages=None)


def ideal_decayed_attention(q_seq, k_seq, v_seq, config: OracleConfig,
                            tau: float, dt: float) -> np.ndarray:
    """Like ideal_attention, with retention aging of the cached tokens.

    At step t, key and value j are each multiplied by
    exp(-(t - j) * dt / tau) before use, mirroring lazy capacitor decay in
    both analog arrays. tau = inf reproduces ideal_attention exactly.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not dt > 0:
        raise ValueError("dt must be positive")
    q, k, v = _check_streams(q_seq, k_seq, v_seq, config.dim)
    return _attend(q, k, v, config, ages=(tau, dt))


def _attend(q, k, v, config, ages):
    steps = q.shape[0]
    out = np.zeros((steps, config.dim))
    denom = math.sqrt(config.dim) if config.scale else 1.0
    for t in range(steps):
        start = max(0, t - config.window + 1)
        keys = k[start:t + 1]
        vals = v[start:t + 1]
        if ages is not None:
            tau, dt = ages
            factor = np.exp(-(t - np.arange(start, t + 1)) * dt / tau)
            keys = keys * factor[:, None]
            vals = vals * factor[:, None]
        scores = keys @ q[t] / denom
        if config.activation == "relu":
            weights = np.maximum(scores, 0.0)
        else:
            shifted = np.exp(scores - scores.max())
            weights = shifted / shifted.sum()
        out[t] = weights @ vals
    return out
