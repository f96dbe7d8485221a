"""Gain-cell device behavior: stored charge, read current, and retention loss.

A cell is a two-transistor-one-capacitor element. The write transistor places
a voltage on the storage capacitor; the read transistor converts that voltage
into a bit-line current without disturbing the charge, so reads are
non-destructive and can repeat every step. Voltages are kept offset-relative:
w = 0 V is the resting point (mid-rail on the storage node) where the cell
contributes no current, and full scale is +-0.45 V. Polarity folds into the
transfer function: a cell stores w and sources current -i(w), with i the
monotone device curve, so pushing the storage node below rest yields positive
bit-line current.

Charge leaks off the capacitor exponentially with time constant tau. The
simulator is event-stepped (one token per step of wall-clock length dt), so
decay is applied lazily: state carries the step index of the last write and
the effective voltage at read time is w * exp(-elapsed_steps * dt / tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal import QuantizerSpec

# Full-scale stored voltage, volts, relative to the resting point (half the
# 0.9 V supply). Level maps and state validation both pin to this.
V_SWING = 0.45

_KINDS = ("linear", "cubic")


@dataclass
class DeviceModel:
    """Device transfer curve and retention parameters.

    kind: "linear" gives i(w) = beta * w; "cubic" gives
        i(w) = c1*w + c2*w**2 + c3*w**3 with (c1, c2, c3) = cubic_coeffs.
        Cell current is the negated curve (see module docstring).
    beta: linear transconductance, amperes per volt. Positive.
    cubic_coeffs: synthetic mild-nonlinearity defaults; configurable.
    tau: retention time constant, seconds. May be math.inf (no decay).
    dt: wall-clock seconds per pipeline step (one token).
    variability_sigma: std-dev of the multiplicative per-cell gain spread,
        sampled once per cell at write time. 0 disables variability.
    """

    kind: str = "linear"
    beta: float = 1.0
    cubic_coeffs: tuple[float, float, float] = (1.0, 0.05, -0.8)
    tau: float = 1.0
    dt: float = 65e-9
    variability_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown device kind {self.kind!r}, expected one of {_KINDS}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if len(tuple(self.cubic_coeffs)) != 3:
            raise ValueError("cubic_coeffs must have exactly three entries")
        if not self.tau > 0:
            raise ValueError("tau must be positive (math.inf disables decay)")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError("dt must be positive and finite")
        if self.variability_sigma < 0:
            raise ValueError("variability_sigma must be >= 0")


@dataclass(frozen=True)
class GainCellState:
    """One cell's stored state.

    w: stored voltage relative to rest, volts, |w| <= 0.45.
    written_at: step index of the last write, or None if never written.
        A never-written cell rests at w = 0 and never decays.
    """

    w: float = 0.0
    written_at: int | None = None

    def __post_init__(self):
        if abs(self.w) > V_SWING + 1e-12:
            raise ValueError(f"stored voltage {self.w} outside +-{V_SWING} V")
        if self.written_at is None and self.w != 0.0:
            raise ValueError("a never-written cell must rest at w = 0")


def cell_current(model: DeviceModel, w, gate_open=True, gain_jitter=1.0):
    """Read current drawn by a cell holding voltage w. Elementwise on arrays.

    Returns exactly 0 when the read gate is closed. gain_jitter is the
    multiplicative per-cell gain (1.0 nominal) and must be positive.
    """
    if np.any(np.asarray(gain_jitter) <= 0):
        raise ValueError("gain_jitter must be positive")
    w_arr = np.asarray(w, dtype=float)
    if np.any(np.abs(w_arr) > V_SWING + 1e-12):
        raise ValueError(f"stored voltage outside +-{V_SWING} V")
    if not gate_open:
        return np.zeros_like(w_arr) if isinstance(w, np.ndarray) else 0.0
    if model.kind == "linear":
        raw = model.beta * w_arr
    else:
        c1, c2, c3 = model.cubic_coeffs
        raw = c1 * w_arr + c2 * w_arr**2 + c3 * w_arr**3
    out = -raw * gain_jitter
    return out if isinstance(w, np.ndarray) else float(out)


def decay_factor(elapsed_steps, model: DeviceModel):
    """Retention factor exp(-elapsed_steps * dt / tau). Elementwise on arrays.

    With tau = inf the rate underflows to exactly 0 and the factor is 1.
    """
    rate = model.dt / model.tau
    return np.exp(-np.multiply(elapsed_steps, rate))


def apply_decay(state: GainCellState, now: int, model: DeviceModel) -> GainCellState:
    """State as observed at step `now`, with retention loss applied.

    Lazy evaluation: nothing mutates, the returned copy holds the decayed
    voltage. Reading a never-written cell is fine (it stays at rest).
    """
    if state.written_at is None:
        return state
    if now < state.written_at:
        raise ValueError(f"cannot observe step {now} before the write at {state.written_at}")
    factor = float(decay_factor(now - state.written_at, model))
    return GainCellState(w=state.w * factor, written_at=state.written_at)


def level_voltage(level, levels: int):
    """Affine map from a storage quantizer level to volts.

    Level 0 is -0.45 V, the top level is exactly +0.45 V. Elementwise on
    integer arrays.
    """
    arr = np.asarray(level)
    if np.any(arr < 0) or np.any(arr > levels - 1):
        raise ValueError(f"level outside [0, {levels - 1}]")
    span = 2 * V_SWING / (levels - 1)
    volts = np.where(arr == levels - 1, V_SWING, -V_SWING + arr * span)
    return volts if isinstance(level, np.ndarray) else float(volts)


def write_cell(state: GainCellState, level: int, spec: QuantizerSpec, now: int) -> GainCellState:
    """Overwrite a cell with the voltage for `level`, timestamped at `now`.

    The previous contents (including any pending decay) are discarded; a
    write fully refreshes the storage node.
    """
    if not isinstance(level, (int, np.integer)):
        raise ValueError(f"level must be an integer, got {level!r}")
    return GainCellState(w=level_voltage(int(level), spec.levels), written_at=now)
