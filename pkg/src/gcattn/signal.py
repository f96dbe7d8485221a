"""Digital signal conditioning shared by every stage of the analog pipeline.

Values cross between the digital and analog domains through three primitives:
an affine scaling stage (trainable gain/offset that places a signal inside a
converter's usable range), a clipped uniform quantizer, and a pulse-width
encoder that turns quantized values into word-line pulse durations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ScalingStage:
    """Affine map y = a * x + b applied before a quantizer.

    The gain may be negative (used to flip signal polarity into a storage
    convention) but never zero, since a zero gain destroys the signal and
    cannot be corrected by statistics matching.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("scaling parameters must be finite")
        if self.a == 0.0:
            raise ValueError("scaling gain must be nonzero")


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform quantizer: `levels` grid points spanning [lo, hi] inclusive."""

    levels: int
    lo: float
    hi: float

    def __post_init__(self):
        if not isinstance(self.levels, int) or self.levels < 2:
            raise ValueError(f"need an integer level count >= 2, got {self.levels!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("quantizer bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"empty quantizer range [{self.lo}, {self.hi}]")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.levels - 1)


@dataclass(frozen=True)
class PwmPulse:
    """One word-line pulse; width in nanoseconds.

    Under the standard 16-level encoder over [0, 15] ns the width is a whole
    number of 1 GHz clock periods. Idealized configs may use finer encoders,
    so the type itself only requires a finite width.
    """

    width: float

    def __post_init__(self):
        if not math.isfinite(self.width):
            raise ValueError("pulse width must be finite")


class Quantized(NamedTuple):
    level: int | np.ndarray
    value: float | np.ndarray


def scale(x, stage: ScalingStage):
    """Apply the affine stage elementwise. Accepts scalars or arrays."""
    return stage.a * x + stage.b


def quantize(x, spec: QuantizerSpec) -> Quantized:
    """Clip to [lo, hi], then snap to the nearest grid level.

    Ties (inputs exactly halfway between levels) round toward the level with
    the even index. Returns both the level index and the reconstructed value;
    the top level reconstructs to exactly `hi` so that endpoint writes are
    bit-exact. NaN is rejected, infinities clip.
    """
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("cannot quantize NaN")
    clipped = np.clip(arr, spec.lo, spec.hi)
    idx = np.rint((clipped - spec.lo) / spec.step)
    value = np.where(idx == spec.levels - 1, spec.hi, spec.lo + idx * spec.step)
    if arr.ndim == 0:
        return Quantized(int(idx), float(value))
    return Quantized(idx.astype(np.int64), value)


def encode_pwm(x, spec: QuantizerSpec) -> PwmPulse:
    """Quantize a scaled input and emit it as a pulse width in nanoseconds."""
    return PwmPulse(width=quantize(x, spec).value)
