"""Trace capture and serialization for simulation runs.

Traces are long-format: one row per recorded scalar, keyed by
(step, stage, tile, index). Per-step records (q_in, head_out) carry tile -1;
per-tile records carry the sub-tile index. Floats are written with repr so
files from identical runs are byte-identical and values round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attention import STAGE_TAGS
from .crossbar import ConverterSpec

CSV_HEADER = "step,stage,tile,index,value"


@dataclass(frozen=True)
class TraceRecord:
    step: int
    stage: str
    tile: int
    payload: np.ndarray


class TraceTap:
    """Collects records for a chosen set of stages.

    Self-clocking: head_out closes each pipeline step, so the step index
    advances after one is seen (whether or not head_out itself is kept).
    """

    def __init__(self, stages=STAGE_TAGS):
        stages = tuple(stages)
        unknown = [s for s in stages if s not in STAGE_TAGS]
        if unknown:
            raise ValueError(f"unknown stage(s) {unknown}; known: {list(STAGE_TAGS)}")
        self._stages = frozenset(stages)
        self.records: list[TraceRecord] = []
        self.step = 0

    def record(self, tag, tile, values):
        if tag in self._stages:
            self.records.append(TraceRecord(
                step=self.step, stage=tag, tile=tile,
                payload=np.array(values, dtype=float).ravel()))
        if tag == "head_out":
            self.step += 1


class SummaryTap:
    """Streaming run statistics: sparsity, saturation, output norms.

    Sparsity is the fraction of score pulses that are exactly zero, pooled
    over every tile line and step (unwritten lines pulse zero and count, so
    early steps of a long window read as very sparse). Saturation counts
    score charges at or beyond the positive rail and output charges at or
    beyond either rail.
    """

    def __init__(self, relu_conv: ConverterSpec, signed_conv: ConverterSpec):
        self._relu_sat_at = relu_conv.s_sat
        self._signed_sat_at = signed_conv.s_sat
        self.pulses = 0
        self.zero_pulses = 0
        self.relu_saturated = 0
        self.signed_saturated = 0
        self.score_charges = 0
        self.out_charges = 0
        self.step_norms: list[float] = []

    def record(self, tag, tile, values):
        arr = np.asarray(values, dtype=float)
        if tag == "relu_pulse":
            self.pulses += arr.size
            self.zero_pulses += int(np.count_nonzero(arr == 0.0))
        elif tag == "charge_qk":
            self.score_charges += arr.size
            self.relu_saturated += int(np.count_nonzero(arr >= self._relu_sat_at))
        elif tag == "charge_sv":
            self.out_charges += arr.size
            self.signed_saturated += int(np.count_nonzero(
                np.abs(arr) >= self._signed_sat_at))
        elif tag == "head_out":
            self.step_norms.append(float(np.linalg.norm(arr)))

    @property
    def realized_sparsity(self) -> float:
        return self.zero_pulses / self.pulses if self.pulses else 0.0

    def summary(self) -> dict:
        return {
            "steps": len(self.step_norms),
            "realized_sparsity": self.realized_sparsity,
            "zero_pulses": self.zero_pulses,
            "pulses": self.pulses,
            "relu_saturated": self.relu_saturated,
            "score_charges": self.score_charges,
            "signed_saturated": self.signed_saturated,
            "out_charges": self.out_charges,
            "output_norm_mean": float(np.mean(self.step_norms)) if self.step_norms else 0.0,
            "output_norm_max": float(np.max(self.step_norms)) if self.step_norms else 0.0,
        }


def write_trace_csv(records, path: str | Path) -> None:
    lines = [CSV_HEADER]
    for rec in records:
        prefix = f"{rec.step},{rec.stage},{rec.tile},"
        lines.extend(prefix + f"{i},{float(v)!r}" for i, v in enumerate(rec.payload))
    Path(path).write_text("\n".join(lines) + "\n")


def write_trace_jsonl(records, path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(
                {"step": rec.step, "stage": rec.stage, "tile": rec.tile,
                 "values": [float(v) for v in rec.payload]},
                sort_keys=True, separators=(",", ":")) + "\n")


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
