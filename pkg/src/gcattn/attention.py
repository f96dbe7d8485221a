"""Tiled sliding-window attention on gain-cell crossbars.

One attention head is a ring buffer of token slots spread across sub-tiles.
Each sub-tile is a pair of crossbar arrays: a key array whose bit lines
produce per-slot score charges, and a value array driven by the rectified
score pulses. Writes are column-wise and circular: token t lands in slot
t mod window, overwriting the oldest token, and the write settles before the
read so a token always attends to itself. The value array's write enables are
transposed relative to the key array's; the simulator keeps both arrays in
[slot, line] order and notes the transposition here rather than modeling
per-enable wiring.

The per-step data path:

    q --scale--> quantize --> pulse widths           (digital, host side)
    per tile:  widths x K cells --> score charges    (analog MAC)
               score charge --> ReLU pulse           (rectifying converter)
               pulses x V cells --> output charges   (analog MAC)
               output charge --> signed count        (signed converter)
    counts summed across tiles by exact digital adders,
    then the output scaling and output quantizer produce the head output.

Scores never exist digitally: rectification happens in charge space, and only
the rectified, saturated, clock-floored pulse reaches the value array. The
1/sqrt(dim) attention scaling is absorbed into the trainable scaling stages.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .crossbar import ConverterSpec, floor_to_grid, relu_transfer, signed_transfer
from .device import V_SWING, DeviceModel, cell_current, decay_factor, level_voltage
from .signal import QuantizerSpec, ScalingStage, quantize, scale

# Trace/probe tags emitted along the pipeline, in emission order per step.
STAGE_TAGS = ("q_in", "charge_qk", "relu_pulse", "charge_sv", "counter_out", "head_out")
SCALE_TAGS = ("scale_q", "scale_k", "scale_v", "scale_out")


@dataclass
class AttentionHeadConfig:
    """Everything one head needs: geometry, device, converters, scalings.

    dim: token vector length (also the number of value-array output lines).
    tile_size: token slots per sub-tile; must be >= dim so a token's
        components fit one column write.
    num_tiles: sub-tile count; window = tile_size * num_tiles.
    """

    dim: int
    tile_size: int
    num_tiles: int
    device: DeviceModel
    input_quant: QuantizerSpec
    stored_quant: QuantizerSpec
    output_quant: QuantizerSpec
    relu_conv: ConverterSpec
    signed_conv: ConverterSpec
    q_scale: ScalingStage
    k_scale: ScalingStage
    v_scale: ScalingStage
    out_scale: ScalingStage

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.tile_size < self.dim:
            raise ValueError(
                f"tile_size {self.tile_size} cannot hold dim {self.dim} writes")
        if self.num_tiles < 1:
            raise ValueError("num_tiles must be >= 1")

    @property
    def window(self) -> int:
        return self.tile_size * self.num_tiles


@dataclass
class TilePair:
    """One sub-tile: paired key/value crossbars plus write metadata.

    Arrays are [slot, line] with line 0..dim-1 carrying data; stored voltages
    are offset-relative volts. written_at is -1 for never-written slots, else
    the step index of the slot's last refresh (keys and values are written
    together, so one timestamp serves both arrays). Gains hold the
    multiplicative per-cell variability sampled at write time (1.0 nominal).
    """

    k_volts: np.ndarray
    v_volts: np.ndarray
    written_at: np.ndarray
    k_gain: np.ndarray
    v_gain: np.ndarray

    @classmethod
    def empty(cls, tile_size: int) -> "TilePair":
        shape = (tile_size, tile_size)
        return cls(
            k_volts=np.zeros(shape),
            v_volts=np.zeros(shape),
            written_at=np.full(tile_size, -1, dtype=np.int64),
            k_gain=np.ones(shape),
            v_gain=np.ones(shape),
        )


class SlidingWindowCache:
    """Mutable per-head state: the tiles, the ring pointer, the step clock.

    A cache is exclusively owned while stepping; nothing here is shared or
    locked. The variability generator is owned by the cache so runs are
    reproducible from (config, seed) alone.
    """

    def __init__(self, config: AttentionHeadConfig, seed: int = 0):
        self.config = config
        self.tiles = [TilePair.empty(config.tile_size) for _ in range(config.num_tiles)]
        self.step_index = 0
        self.write_ptr = 0
        self._rng = np.random.default_rng(seed)

    def clone(self) -> "SlidingWindowCache":
        return copy.deepcopy(self)


def new_cache(config: AttentionHeadConfig, seed: int = 0) -> SlidingWindowCache:
    return SlidingWindowCache(config, seed=seed)


def _emit(tap, tag: str, tile: int, values) -> None:
    if tap is not None:
        tap.record(tag, tile, values)


class RecordingTap:
    """Keeps every emitted record as (tag, tile, copied array)."""

    def __init__(self, tags=None):
        self.records: list[tuple[str, int, np.ndarray]] = []
        self._tags = None if tags is None else set(tags)

    def record(self, tag, tile, values):
        if self._tags is None or tag in self._tags:
            self.records.append((tag, tile, np.array(values, dtype=float)))

    def by_tag(self, tag):
        return [rec for rec in self.records if rec[0] == tag]


class MultiTap:
    """Fans one record stream out to several consumers."""

    def __init__(self, taps):
        self.taps = [t for t in taps if t is not None]

    def record(self, tag, tile, values):
        for t in self.taps:
            t.record(tag, tile, values)


def _check_vector(vec, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=float)
    if arr.shape != (dim,):
        raise ValueError(f"{name} must have shape ({dim},), got {arr.shape}")
    return arr


def write_kv(cache: SlidingWindowCache, k_vec, v_vec, tap=None) -> SlidingWindowCache:
    """Refresh the slot at the write pointer with a new key/value pair.

    Components are scaled, quantized to the storage grid, and written as
    voltages with the current step as timestamp. The pointer itself advances
    in step(), after the paired attend.
    """
    cfg = cache.config
    k_arr = _check_vector(k_vec, cfg.dim, "key")
    v_arr = _check_vector(v_vec, cfg.dim, "value")

    tile = cache.tiles[cache.write_ptr // cfg.tile_size]
    slot = cache.write_ptr % cfg.tile_size

    for name, arr, stage, volts_out, gain_out in (
        ("scale_k", k_arr, cfg.k_scale, tile.k_volts, tile.k_gain),
        ("scale_v", v_arr, cfg.v_scale, tile.v_volts, tile.v_gain),
    ):
        scaled = scale(arr, stage)
        _emit(tap, name, -1, scaled)
        levels = quantize(scaled, cfg.stored_quant).level
        volts_out[slot, :] = 0.0
        volts_out[slot, :cfg.dim] = level_voltage(levels, cfg.stored_quant.levels)
        gain_out[slot, :] = 1.0
        if cfg.device.variability_sigma > 0:
            gain_out[slot, :cfg.dim] = cache._rng.normal(
                1.0, cfg.device.variability_sigma, cfg.dim)
    tile.written_at[slot] = cache.step_index
    return cache


def attend(cache: SlidingWindowCache, q_vec, tap=None) -> np.ndarray:
    """Run one query through the analog pipeline; returns the head output.

    Read-only: repeated attends at the same step give identical results.
    Tiles are independent (hardware evaluates them concurrently); their
    counter vectors are combined in tile order by exact integer addition.
    """
    cfg = cache.config
    now = cache.step_index
    q_arr = _check_vector(q_vec, cfg.dim, "query")

    scaled_q = scale(q_arr, cfg.q_scale)
    _emit(tap, "scale_q", -1, scaled_q)
    widths = np.zeros(cfg.tile_size)
    widths[:cfg.dim] = quantize(scaled_q, cfg.input_quant).value
    _emit(tap, "q_in", -1, widths[:cfg.dim])

    counter_sum = np.zeros(cfg.tile_size)
    for index, tile in enumerate(cache.tiles):
        aging = decay_factor(now - tile.written_at, cfg.device)
        k_seen = tile.k_volts * aging[:, None]
        score_charge = cell_current(cfg.device, k_seen, gain_jitter=tile.k_gain) @ widths
        _emit(tap, "charge_qk", index, score_charge)

        pulses = floor_to_grid(relu_transfer(score_charge, cfg.relu_conv), cfg.relu_conv)
        _emit(tap, "relu_pulse", index, pulses)

        v_seen = tile.v_volts * aging[:, None]
        out_charge = pulses @ cell_current(cfg.device, v_seen, gain_jitter=tile.v_gain)
        _emit(tap, "charge_sv", index, out_charge[:cfg.dim])

        magnitude, sign = signed_transfer(out_charge, cfg.signed_conv)
        counters = sign * floor_to_grid(magnitude, cfg.signed_conv)
        _emit(tap, "counter_out", index, counters[:cfg.dim])
        counter_sum += counters

    scaled_out = scale(counter_sum[:cfg.dim], cfg.out_scale)
    _emit(tap, "scale_out", -1, scaled_out)
    head_out = quantize(scaled_out, cfg.output_quant).value
    _emit(tap, "head_out", -1, head_out)
    return head_out


def step(cache: SlidingWindowCache, q_vec, k_vec, v_vec, tap=None):
    """One token: write the key/value pair, attend, then advance the clock.

    Write-before-read, so the current token is always inside its own window.
    Returns (cache, head output). Advancing the step clock is what ages every
    stored weight by one dt (decay is evaluated lazily at read time).
    """
    write_kv(cache, k_vec, v_vec, tap=tap)
    out = attend(cache, q_vec, tap=tap)
    cache.step_index += 1
    cache.write_ptr = cache.step_index % cache.config.window
    return cache, out


def run_stream(config: AttentionHeadConfig, q_seq, k_seq, v_seq,
               tap=None, seed: int = 0) -> np.ndarray:
    """Feed a whole token stream through a fresh cache; returns (steps, dim)."""
    q = np.asarray(q_seq, dtype=float)
    k = np.asarray(k_seq, dtype=float)
    v = np.asarray(v_seq, dtype=float)
    if not (q.shape == k.shape == v.shape) or q.ndim != 2:
        raise ValueError(f"stream shapes differ: {q.shape}, {k.shape}, {v.shape}")
    cache = new_cache(config, seed=seed)
    outs = np.zeros((q.shape[0], config.dim))
    for t in range(q.shape[0]):
        _, outs[t] = step(cache, q[t], k[t], v[t], tap=tap)
    return outs


# --------------------------------------------------------------------------
# Idealization preset
# --------------------------------------------------------------------------

_IDEAL_LEVELS = 2**36 + 1       # odd, so zero sits exactly on the grid
_IDEAL_CLOCK_GHZ = float(2**36)  # counter grid ~1.5e-11 ns: flooring is inert
_SAT_MARGIN = 1.05


def idealized_head_config(dim: int, tile_size: int, num_tiles: int,
                          token_bound: float = 1.0, dt: float = 65e-9,
                          tau: float = math.inf) -> AttentionHeadConfig:
    """A config whose pipeline reduces to exact scaled ReLU attention.

    Linear device, quantizers fine enough to be effectively continuous,
    converters kept strictly inside their linear regions for token
    components bounded by token_bound, and no decay by default. The output
    scaling is derived analytically so the head output equals ideal
    1/sqrt(dim)-scaled ReLU sliding-window attention with constant exactly 1.

    Storage polarity: key/value scalings are negative (a signal below the
    resting voltage sources positive current), which keeps the end-to-end
    constant positive so rectification commutes with the scaling chain.
    """
    if token_bound <= 0:
        raise ValueError("token_bound must be positive")
    beta = 1.0
    t_max = 15.0
    device = DeviceModel(kind="linear", beta=beta, tau=tau, dt=dt,
                         variability_sigma=0.0)

    gain_q = 1.0
    in_hi = gain_q * token_bound
    input_quant = QuantizerSpec(_IDEAL_LEVELS, -in_hi, in_hi)
    stored_quant = QuantizerSpec(_IDEAL_LEVELS, -V_SWING, V_SWING)

    # Charge bounds for components within +-token_bound, with margin so the
    # converters never saturate and never floor anything that matters.
    score_sat = dim * in_hi * V_SWING * beta * _SAT_MARGIN
    out_sat = tile_size * t_max * V_SWING * beta * _SAT_MARGIN
    relu_conv = ConverterSpec(s_sat=score_sat, t_max=t_max,
                              counter_clock_ghz=_IDEAL_CLOCK_GHZ)
    signed_conv = ConverterSpec(s_sat=out_sat, t_max=t_max,
                                counter_clock_ghz=_IDEAL_CLOCK_GHZ)

    # End-to-end constant of the linear chain, one factor per stage.
    charge_per_score = gain_q * beta * V_SWING / token_bound
    pulse_per_score = t_max * charge_per_score / score_sat
    charge_per_sum = pulse_per_score * beta * V_SWING / token_bound
    count_per_sum = charge_per_sum * t_max / out_sat
    out_gain = 1.0 / (count_per_sum * math.sqrt(dim))

    window = tile_size * num_tiles
    out_bound = window * dim * token_bound**3 / math.sqrt(dim) * _SAT_MARGIN
    output_quant = QuantizerSpec(_IDEAL_LEVELS, -out_bound, out_bound)

    return AttentionHeadConfig(
        dim=dim, tile_size=tile_size, num_tiles=num_tiles, device=device,
        input_quant=input_quant, stored_quant=stored_quant,
        output_quant=output_quant, relu_conv=relu_conv,
        signed_conv=signed_conv,
        q_scale=ScalingStage(a=gain_q, b=0.0),
        k_scale=ScalingStage(a=-V_SWING / token_bound, b=0.0),
        v_scale=ScalingStage(a=-V_SWING / token_bound, b=0.0),
        out_scale=ScalingStage(a=out_gain, b=0.0),
    )


# Calibrated against unit-Gaussian synthetic tokens at the reference geometry
# (dim 64, 16 tiles of 64, steady-state window): saturation charges sit above
# the 99th percentile of |charge| (19.3 and 9.4 measured) and the output range
# above the 99.9th percentile of |scaled output| (204 measured).
_DEFAULT_RELU_SAT = 25.0
_DEFAULT_SIGNED_SAT = 18.0
_DEFAULT_OUT_BOUND = 240.0


def default_head_config() -> AttentionHeadConfig:
    """The reference head: 16 sub-tiles of 64x64, 1024-token window.

    Scalings place unit-Gaussian tokens inside the converter ranges
    (three-sigma full scale); the output scaling is the analytic linear-chain
    constant, so outputs are directly comparable to the scaled ideal
    reference. 1/sqrt(dim) is absorbed here, not applied separately.
    """
    dim, tile_size, num_tiles = 64, 64, 16
    beta, t_max = 1.0, 15.0
    device = DeviceModel()
    q_scale = ScalingStage(a=2.5, b=7.5)        # +-3 sigma -> [0, 15] ns
    k_scale = ScalingStage(a=-0.15, b=0.0)      # +-3 sigma -> -+0.45 V
    v_scale = ScalingStage(a=-0.15, b=0.0)

    relu_conv = ConverterSpec(s_sat=_DEFAULT_RELU_SAT, t_max=t_max)
    signed_conv = ConverterSpec(s_sat=_DEFAULT_SIGNED_SAT, t_max=t_max)

    # Same chain constant as the idealized preset, evaluated at the hardware
    # operating point, so default outputs live on the ideal scale.
    charge_per_score = q_scale.a * beta * 0.15
    pulse_per_score = t_max * charge_per_score / relu_conv.s_sat
    charge_per_sum = pulse_per_score * beta * 0.15
    count_per_sum = charge_per_sum * t_max / signed_conv.s_sat
    out_gain = 1.0 / (count_per_sum * math.sqrt(dim))

    return AttentionHeadConfig(
        dim=dim, tile_size=tile_size, num_tiles=num_tiles, device=device,
        input_quant=QuantizerSpec(16, 0.0, 15.0),
        stored_quant=QuantizerSpec(8, -V_SWING, V_SWING),
        output_quant=QuantizerSpec(32, -_DEFAULT_OUT_BOUND, _DEFAULT_OUT_BOUND),
        relu_conv=relu_conv, signed_conv=signed_conv,
        q_scale=q_scale, k_scale=k_scale, v_scale=v_scale,
        out_scale=ScalingStage(a=out_gain, b=0.0),
    )
