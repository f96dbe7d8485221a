"""Behavioral simulator of an analog in-memory sliding-window attention head.

Signal flow per token: scale and pulse-encode the query, charge-mode dot
products against capacitively stored keys, rectifying pulse conversion,
a second dot product against stored values, signed counting, then output
scaling and quantization. The library models the device physics (retention
decay, nonlinearity, write variability), the converter transfer functions,
the tiled sliding-window cache discipline, a statistics-matching adaptation
loop for the scaling stages, and an analytic energy / latency / area model.
"""

from .adapt import (AdaptReport, ChainPipeline, HeadPipeline, StageStats,
                    adapt_scalings, collect_stats)
from .attention import (SCALE_TAGS, STAGE_TAGS, AttentionHeadConfig, MultiTap,
                        RecordingTap, SlidingWindowCache, attend,
                        default_head_config, idealized_head_config, new_cache,
                        run_stream, step, write_kv)
from .costmodel import (CostConstants, EnergyReport, estimate,
                        gpu_ratio_report, report_rows)
from .crossbar import (BitlineCharge, ConverterSpec, SignedPulse, bitline_mac,
                       counter_decode, floor_to_grid, relu_charge_to_pulse,
                       relu_transfer, signed_charge_to_pulse, signed_transfer)
from .device import (V_SWING, DeviceModel, GainCellState, apply_decay,
                     cell_current, decay_factor, level_voltage, write_cell)
from .oracle import OracleConfig, ideal_attention, ideal_decayed_attention
from .runconfig import (ConfigError, RunConfig, apply_ideal_preset,
                        config_from_dict, config_to_dict, dump_config,
                        load_config, token_streams)
from .signal import (PwmPulse, Quantized, QuantizerSpec, ScalingStage,
                     encode_pwm, quantize, scale)
from .trace import SummaryTap, TraceRecord, TraceTap, write_trace_csv, write_trace_jsonl

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
