"""Run configuration: JSON-shaped, documented field by field in the README.

A config file is a JSON object with one level of grouping. Every key is
optional (defaults fill the gaps) but unknown keys are rejected with the
offending path, so typos fail loudly instead of silently running defaults.
`device.tau` may be the JSON literal Infinity to disable retention decay.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attention import (STAGE_TAGS, AttentionHeadConfig, default_head_config,
                        idealized_head_config)
from .costmodel import CostConstants
from .crossbar import ConverterSpec
from .device import DeviceModel
from .signal import QuantizerSpec, ScalingStage


class ConfigError(ValueError):
    """Anything wrong with a config file or its combination of values."""


@dataclass
class TokenSourceConfig:
    """Where the q/k/v streams come from.

    gaussian: synthetic i.i.d. normal tokens (mean, std), seeded per head.
    file: JSON file at `path` holding either {"q","k","v"} matrices or a raw
        {"x"} feature matrix to be projected (see projections_path).
    """

    kind: str = "gaussian"
    mean: float = 0.0
    std: float = 1.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "file"):
            raise ConfigError(f"token_source.kind must be gaussian or file, got {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigError("token_source.kind=file requires token_source.path")
        if self.std <= 0:
            raise ConfigError("token_source.std must be positive")


@dataclass
class AdaptSettings:
    tol: float = 0.05
    max_iter: int = 50
    samples: int = 4
    sample_tokens: int = 32

    def __post_init__(self):
        if self.samples < 1 or self.sample_tokens < 1:
            raise ConfigError("adapt.samples and adapt.sample_tokens must be >= 1")


@dataclass
class CostSettings:
    sparsity: float | None = None       # None: reference sparsity
    reference_sparsity: float = 0.5
    out_dot_floor_pj: float = 0.0


@dataclass
class RunConfig:
    """Everything a CLI invocation needs; maps 1:1 onto the JSON file."""

    seed: int = 0
    tokens: int = 64
    heads: int = 1
    dim: int = 64
    tile_size: int = 64
    num_tiles: int = 16
    device: DeviceModel = field(default_factory=DeviceModel)
    input_quant: QuantizerSpec = None
    stored_quant: QuantizerSpec = None
    output_quant: QuantizerSpec = None
    relu_conv: ConverterSpec = None
    signed_conv: ConverterSpec = None
    q_scale: ScalingStage = None
    k_scale: ScalingStage = None
    v_scale: ScalingStage = None
    out_scale: ScalingStage = None
    token_source: TokenSourceConfig = field(default_factory=TokenSourceConfig)
    projections_path: str | None = None
    trace_stages: tuple = STAGE_TAGS
    adapt: AdaptSettings = field(default_factory=AdaptSettings)
    cost: CostSettings = field(default_factory=CostSettings)

    def __post_init__(self):
        ref = default_head_config()
        for name in ("input_quant", "stored_quant", "output_quant", "relu_conv",
                     "signed_conv", "q_scale", "k_scale", "v_scale", "out_scale"):
            if getattr(self, name) is None:
                setattr(self, name, getattr(ref, name))
        if self.tokens < 0:
            raise ConfigError("tokens must be >= 0")
        if self.heads < 1:
            raise ConfigError("heads must be >= 1")
        if self.dim < 1:
            raise ConfigError("geometry.dim must be >= 1")
        if self.tile_size < self.dim:
            raise ConfigError(f"geometry.tile_size {self.tile_size} cannot hold "
                              f"dim {self.dim} writes")
        if self.num_tiles < 1:
            raise ConfigError("geometry.num_tiles must be >= 1")
        unknown = [s for s in self.trace_stages if s not in STAGE_TAGS]
        if unknown:
            raise ConfigError(f"unknown trace stage(s) {unknown}; known: {list(STAGE_TAGS)}")

    def head_config(self) -> AttentionHeadConfig:
        try:
            return AttentionHeadConfig(
                dim=self.dim, tile_size=self.tile_size, num_tiles=self.num_tiles,
                device=self.device, input_quant=self.input_quant,
                stored_quant=self.stored_quant, output_quant=self.output_quant,
                relu_conv=self.relu_conv, signed_conv=self.signed_conv,
                q_scale=self.q_scale, k_scale=self.k_scale,
                v_scale=self.v_scale, out_scale=self.out_scale)
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def cost_constants(self) -> CostConstants:
        return CostConstants(reference_sparsity=self.cost.reference_sparsity,
                             out_dot_floor_pj=self.cost.out_dot_floor_pj)


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

def _check_keys(raw: dict, allowed, path: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {path or 'top level'}; "
                          f"allowed: {sorted(allowed)}")


def _number(raw, path):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path} must be a number, got {raw!r}")
    return raw


def _integer(raw, path):
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{path} must be an integer, got {raw!r}")
    return raw


def _build(cls, raw: dict, defaults: dict, path: str, caster=None):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must be an object, got {raw!r}")
    _check_keys(raw, defaults, path)
    merged = {**defaults, **raw}
    if caster:
        merged = caster(merged)
    try:
        return cls(**merged)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"{path}: {err}") from err


_TOP_KEYS = ("seed", "tokens", "heads", "geometry", "device", "quantizers",
             "converters", "scalings", "token_source", "projections_path",
             "trace", "adapt", "cost")


def config_from_dict(data: dict) -> RunConfig:
    """Strictly parse a config object; defaults fill whatever is absent."""
    if not isinstance(data, dict):
        raise ConfigError(f"config must be a JSON object, got {type(data).__name__}")
    _check_keys(data, _TOP_KEYS, "")
    ref = RunConfig()

    geometry = data.get("geometry", {})
    if not isinstance(geometry, dict):
        raise ConfigError("geometry must be an object")
    _check_keys(geometry, ("dim", "tile_size", "num_tiles"), "geometry")

    def cast_device(merged):
        merged["cubic_coeffs"] = tuple(merged["cubic_coeffs"])
        merged["tau"] = float(merged["tau"])
        return merged

    device = _build(DeviceModel, data.get("device", {}), {
        "kind": ref.device.kind, "beta": ref.device.beta,
        "cubic_coeffs": list(ref.device.cubic_coeffs), "tau": ref.device.tau,
        "dt": ref.device.dt, "variability_sigma": ref.device.variability_sigma,
    }, "device", caster=cast_device)

    quants = data.get("quantizers", {})
    if not isinstance(quants, dict):
        raise ConfigError("quantizers must be an object")
    _check_keys(quants, ("input", "stored", "output"), "quantizers")
    quant_specs = {}
    for name, default in (("input", ref.input_quant), ("stored", ref.stored_quant),
                          ("output", ref.output_quant)):
        quant_specs[name] = _build(QuantizerSpec, quants.get(name, {}), {
            "levels": default.levels, "lo": default.lo, "hi": default.hi,
        }, f"quantizers.{name}")

    convs = data.get("converters", {})
    if not isinstance(convs, dict):
        raise ConfigError("converters must be an object")
    _check_keys(convs, ("relu", "signed"), "converters")
    conv_specs = {}
    for name, default in (("relu", ref.relu_conv), ("signed", ref.signed_conv)):
        conv_specs[name] = _build(ConverterSpec, convs.get(name, {}), {
            "s_sat": default.s_sat, "t_max": default.t_max,
            "counter_clock_ghz": default.counter_clock_ghz,
        }, f"converters.{name}")

    scalings = data.get("scalings", {})
    if not isinstance(scalings, dict):
        raise ConfigError("scalings must be an object")
    _check_keys(scalings, ("q", "k", "v", "out"), "scalings")
    stages = {}
    for name, default in (("q", ref.q_scale), ("k", ref.k_scale),
                          ("v", ref.v_scale), ("out", ref.out_scale)):
        stages[name] = _build(ScalingStage, scalings.get(name, {}), {
            "a": default.a, "b": default.b,
        }, f"scalings.{name}")

    source = _build(TokenSourceConfig, data.get("token_source", {}), {
        "kind": ref.token_source.kind, "mean": ref.token_source.mean,
        "std": ref.token_source.std, "path": ref.token_source.path,
    }, "token_source")

    trace = data.get("trace", {})
    if not isinstance(trace, dict):
        raise ConfigError("trace must be an object")
    _check_keys(trace, ("stages",), "trace")
    trace_stages = tuple(trace.get("stages", ref.trace_stages))

    adapt = _build(AdaptSettings, data.get("adapt", {}), {
        "tol": ref.adapt.tol, "max_iter": ref.adapt.max_iter,
        "samples": ref.adapt.samples, "sample_tokens": ref.adapt.sample_tokens,
    }, "adapt")

    cost = _build(CostSettings, data.get("cost", {}), {
        "sparsity": ref.cost.sparsity,
        "reference_sparsity": ref.cost.reference_sparsity,
        "out_dot_floor_pj": ref.cost.out_dot_floor_pj,
    }, "cost")

    projections = data.get("projections_path")
    if projections is not None and not isinstance(projections, str):
        raise ConfigError("projections_path must be a string or null")

    try:
        return RunConfig(
            seed=_integer(data.get("seed", ref.seed), "seed"),
            tokens=_integer(data.get("tokens", ref.tokens), "tokens"),
            heads=_integer(data.get("heads", ref.heads), "heads"),
            dim=_integer(geometry.get("dim", ref.dim), "geometry.dim"),
            tile_size=_integer(geometry.get("tile_size", ref.tile_size),
                               "geometry.tile_size"),
            num_tiles=_integer(geometry.get("num_tiles", ref.num_tiles),
                               "geometry.num_tiles"),
            device=device,
            input_quant=quant_specs["input"], stored_quant=quant_specs["stored"],
            output_quant=quant_specs["output"],
            relu_conv=conv_specs["relu"], signed_conv=conv_specs["signed"],
            q_scale=stages["q"], k_scale=stages["k"], v_scale=stages["v"],
            out_scale=stages["out"],
            token_source=source, projections_path=projections,
            trace_stages=trace_stages, adapt=adapt, cost=cost,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from err


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of config_from_dict; stable key order for byte-stable dumps."""
    return {
        "seed": cfg.seed, "tokens": cfg.tokens, "heads": cfg.heads,
        "geometry": {"dim": cfg.dim, "tile_size": cfg.tile_size,
                     "num_tiles": cfg.num_tiles},
        "device": {"kind": cfg.device.kind, "beta": cfg.device.beta,
                   "cubic_coeffs": list(cfg.device.cubic_coeffs),
                   "tau": cfg.device.tau, "dt": cfg.device.dt,
                   "variability_sigma": cfg.device.variability_sigma},
        "quantizers": {name: {"levels": q.levels, "lo": q.lo, "hi": q.hi}
                       for name, q in (("input", cfg.input_quant),
                                       ("stored", cfg.stored_quant),
                                       ("output", cfg.output_quant))},
        "converters": {name: {"s_sat": c.s_sat, "t_max": c.t_max,
                              "counter_clock_ghz": c.counter_clock_ghz}
                       for name, c in (("relu", cfg.relu_conv),
                                       ("signed", cfg.signed_conv))},
        "scalings": {name: {"a": s.a, "b": s.b}
                     for name, s in (("q", cfg.q_scale), ("k", cfg.k_scale),
                                     ("v", cfg.v_scale), ("out", cfg.out_scale))},
        "token_source": {"kind": cfg.token_source.kind,
                         "mean": cfg.token_source.mean,
                         "std": cfg.token_source.std,
                         "path": cfg.token_source.path},
        "projections_path": cfg.projections_path,
        "trace": {"stages": list(cfg.trace_stages)},
        "adapt": {"tol": cfg.adapt.tol, "max_iter": cfg.adapt.max_iter,
                  "samples": cfg.adapt.samples,
                  "sample_tokens": cfg.adapt.sample_tokens},
        "cost": {"sparsity": cfg.cost.sparsity,
                 "reference_sparsity": cfg.cost.reference_sparsity,
                 "out_dot_floor_pj": cfg.cost.out_dot_floor_pj},
    }


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return config_from_dict(data)


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Token streams
# ---------------------------------------------------------------------------

def _load_matrix(obj, key, path):
    try:
        arr = np.asarray(obj[key], dtype=float)
    except (KeyError, ValueError) as err:
        raise ConfigError(f"{path}: missing or non-numeric {key!r}") from err
    if arr.ndim != 2:
        raise ConfigError(f"{path}: {key!r} must be a 2-d matrix, got shape {arr.shape}")
    return arr


def token_streams(cfg: RunConfig, head_index: int = 0):
    """(q_seq, k_seq, v_seq), each (tokens, dim), for one head.

    Gaussian sources draw a per-head stream from default_rng([seed, head]).
    File sources are shared across heads; with projections_path set, the file
    supplies a raw feature matrix "x" and the projection file supplies
    matrices "w_q", "w_k", "w_v" of shape (features, dim).
    """
    if cfg.token_source.kind == "gaussian":
        rng = np.random.default_rng([cfg.seed, head_index])
        shape = (cfg.tokens, cfg.dim)
        return tuple(rng.normal(cfg.token_source.mean, cfg.token_source.std, shape)
                     for _ in range(3))

    path = cfg.token_source.path
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError) as err:
        raise ConfigError(f"cannot read token file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"token file {path} is not valid JSON: {err}") from err

    if cfg.projections_path:
        x = _load_matrix(data, "x", path)
        try:
            proj = json.loads(Path(cfg.projections_path).read_text())
        except (OSError, UnicodeDecodeError) as err:
            raise ConfigError(f"cannot read projections {cfg.projections_path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"projections file is not valid JSON: {err}") from err
        streams = []
        for key in ("w_q", "w_k", "w_v"):
            w = _load_matrix(proj, key, cfg.projections_path)
            if w.shape != (x.shape[1], cfg.dim):
                raise ConfigError(
                    f"projection {key}: expected shape ({x.shape[1]}, {cfg.dim}) "
                    f"to match features x dim, got {w.shape}")
            streams.append(x @ w)
        q, k, v = streams
    else:
        q = _load_matrix(data, "q", path)
        k = _load_matrix(data, "k", path)
        v = _load_matrix(data, "v", path)
        for name, arr in (("q", q), ("k", k), ("v", v)):
            if arr.shape[1] != cfg.dim:
                raise ConfigError(f"token file {name!r} has dim {arr.shape[1]}, "
                                  f"config expects {cfg.dim}")
    if not (q.shape == k.shape == v.shape):
        raise ConfigError(f"token streams disagree in shape: {q.shape}, {k.shape}, {v.shape}")
    limit = min(cfg.tokens, q.shape[0])
    return q[:limit], k[:limit], v[:limit]


def apply_ideal_preset(cfg: RunConfig) -> RunConfig:
    """Swap in the idealization preset, keeping geometry and run settings.

    The token bound covers a gaussian source out to five sigma; rarer
    components clip gracefully at the quantizer rails. The preset's
    worst-case ranges grow cubically in this bound, so a tighter bound keeps
    the effectively-continuous quantizer steps small. File sources should be
    bounded by the caller (the CLI measures the actual data).
    """
    bound = abs(cfg.token_source.mean) + 5.0 * cfg.token_source.std
    return ideal_with_bound(cfg, bound)


def ideal_with_bound(cfg: RunConfig, token_bound: float) -> RunConfig:
    ideal = idealized_head_config(cfg.dim, cfg.tile_size, cfg.num_tiles,
                                  token_bound=token_bound, dt=cfg.device.dt,
                                  tau=math.inf)
    out = RunConfig(
        seed=cfg.seed, tokens=cfg.tokens, heads=cfg.heads, dim=cfg.dim,
        tile_size=cfg.tile_size, num_tiles=cfg.num_tiles, device=ideal.device,
        input_quant=ideal.input_quant, stored_quant=ideal.stored_quant,
        output_quant=ideal.output_quant, relu_conv=ideal.relu_conv,
        signed_conv=ideal.signed_conv, q_scale=ideal.q_scale,
        k_scale=ideal.k_scale, v_scale=ideal.v_scale, out_scale=ideal.out_scale,
        token_source=cfg.token_source, projections_path=cfg.projections_path,
        trace_stages=cfg.trace_stages, adapt=cfg.adapt, cost=cfg.cost,
    )
    return out
