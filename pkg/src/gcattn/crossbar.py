"""Analog crossbar compute: charge accumulation and charge-to-pulse readout.

A dot product happens physically: word-line pulses gate the cells of one
column for their pulse duration, each gated cell sources its read current,
and the currents integrate on the shared bit line. The accumulated charge is

    charge = sum_j width_j * current_j      (volt-equivalents x nanoseconds)

Charge leaves the analog domain through one of two converter flavors:

* ReLU converter. Emits a pulse whose width follows a three-branch transfer:
  zero for nonpositive charge, a linear ramp with slope t_max / s_sat in
  between, and a hard ceiling of t_max at or above the saturation charge
  s_sat. Rectification is free: it is just the comparator's refusal to fire
  on negative charge.

* Signed converter. Splits charge into a sign comparator (charge >= 0 reads
  +1) and a magnitude ramp with the same saturation, so the magnitude is an
  even function of charge.

A digital counter gated by the pulse counts completed clock periods, which
floors the analog width onto the counter clock grid. The signed reading is
sign * width, a five-bit signed-magnitude value under the default 15 ns
ceiling and 1 GHz clock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .device import DeviceModel, GainCellState, apply_decay, cell_current
from .signal import PwmPulse


@dataclass(frozen=True)
class ConverterSpec:
    """Charge-to-pulse converter parameters.

    s_sat: saturation charge; inputs at or beyond it pin the pulse to t_max.
    t_max: widest emittable pulse, nanoseconds.
    counter_clock_ghz: readout counter clock; pulses are floored onto its
        period grid (1 GHz default, so whole nanoseconds).
    """

    s_sat: float
    t_max: float = 15.0
    counter_clock_ghz: float = 1.0

    def __post_init__(self):
        for name in ("s_sat", "t_max", "counter_clock_ghz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def grid_ns(self) -> float:
        return 1.0 / self.counter_clock_ghz


@dataclass(frozen=True)
class BitlineCharge:
    """Accumulated charge on one bit line, volt-equivalents x nanoseconds."""

    s: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("charge must be finite")


class SignedPulse(NamedTuple):
    width: float
    sign: int


def bitline_mac(pulses: Sequence[PwmPulse], column: Sequence[GainCellState],
                model: DeviceModel, now: int) -> BitlineCharge:
    """Integrate one column's currents under the given word-line pulses.

    Retention loss is applied lazily per cell before the current is read.
    Never-written cells rest at zero voltage and contribute nothing.
    """
    if len(pulses) != len(column):
        raise ValueError(f"{len(pulses)} pulses driving {len(column)} cells")
    total = 0.0
    for pulse, cell in zip(pulses, column):
        seen = apply_decay(cell, now, model)
        total += pulse.width * cell_current(model, seen.w)
    return BitlineCharge(s=total)


def relu_transfer(charge, spec: ConverterSpec):
    """Continuous (pre-counter) ReLU transfer. Elementwise on arrays.

    Exactly 0 at or below zero charge, exactly t_max at or above s_sat, and
    the linear ramp charge * (t_max / s_sat) strictly between. The ramp is
    additionally ceilinged at t_max to keep the transfer monotone under
    floating-point rounding near s_sat.
    """
    s = np.asarray(charge, dtype=float)
    ramp = np.minimum(s * (spec.t_max / spec.s_sat), spec.t_max)
    out = np.where(s <= 0.0, 0.0, np.where(s >= spec.s_sat, spec.t_max, ramp))
    return out if isinstance(charge, np.ndarray) else float(out)


def signed_transfer(charge, spec: ConverterSpec):
    """Continuous signed transfer: (magnitude ramp of |charge|, sign).

    The sign comparator reads +1 for charge >= 0 (a zero charge is reported
    as +0). Magnitude is even in the charge. Elementwise on arrays.
    """
    s = np.asarray(charge, dtype=float)
    width = np.minimum(np.abs(s) * (spec.t_max / spec.s_sat), spec.t_max)
    sign = np.where(s >= 0.0, 1, -1)
    if isinstance(charge, np.ndarray):
        return width, sign
    return float(width), int(sign)


def floor_to_grid(width, spec: ConverterSpec):
    """Counter view of a pulse: completed clock periods only."""
    g = spec.grid_ns
    out = np.floor(np.asarray(width, dtype=float) / g) * g
    return out if isinstance(width, np.ndarray) else float(out)


def relu_charge_to_pulse(charge, spec: ConverterSpec) -> PwmPulse:
    """Full ReLU converter: transfer, then floor onto the counter grid."""
    s = charge.s if isinstance(charge, BitlineCharge) else charge
    return PwmPulse(width=floor_to_grid(relu_transfer(s, spec), spec))


def signed_charge_to_pulse(charge, spec: ConverterSpec) -> SignedPulse:
    """Full signed converter: magnitude transfer, floor, sign comparator."""
    s = charge.s if isinstance(charge, BitlineCharge) else charge
    width, sign = signed_transfer(s, spec)
    return SignedPulse(width=floor_to_grid(width, spec), sign=sign)


def counter_decode(width: float, sign: int, spec: ConverterSpec):
    """Digital reading of a signed pulse: sign * width.

    Whole-nanosecond widths (the hardware grid) give integer readings in
    [-t_max, +t_max].
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    if not 0 <= width <= spec.t_max:
        raise ValueError(f"width {width} outside [0, {spec.t_max}]")
    return sign * width
