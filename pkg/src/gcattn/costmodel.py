"""Analytic energy, latency, and area model for the reference head design.

Constants describe one attention head at the reference geometry (16 sub-tiles
of 64 x 64 cells, 64-dimensional tokens) processing one token. They are
design-point figures, not functions of the simulated geometry; estimates for
other geometries reuse them unchanged and simply record the geometry in the
report.

Energy per head per token has four components:
  * score dot product (input DACs driving the key array),
  * rectified dot product against the value array, whose analog draw shrinks
    when pulses are absent, so it scales with the active (nonzero-pulse)
    fraction relative to the design-point sparsity,
  * digital control and readout (a fixed per-step figure; the companion
    113.7 mW power figure is informational and deliberately not multiplied
    out, since the digital blocks are not active for the full step),
  * the output DACs.

A token step is a fixed five-phase sequence; its phases are pipelined across
the two arrays so the step length is their sum, 65 ns, independent of head
count (heads run in parallel hardware).

GPU reference rows are fixed external measurements of the same 12-head
attention workload (single-token decode) on an NVIDIA RTX 4090 and a Jetson
Nano; they are constants embedded for ratio reporting, never recomputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CostConstants:
    """Design-point constants. Energies in picojoules, times in nanoseconds,
    areas in square millimeters unless suffixed otherwise."""

    # energy, per head per token
    score_dot_pj: float = 1120.0
    out_dot_dense_pj: float = 700.0     # at the design-point sparsity
    out_dot_floor_pj: float = 0.0       # draw when every pulse is absent
    digital_pj: float = 4000.0
    dac_pj: float = 330.0
    digital_power_mw: float = 113.7     # informational only
    reference_sparsity: float = 0.5     # design-point zero-pulse fraction

    # latency phases, per token
    reset_ns: float = 5.0
    input_ns: float = 15.0
    discharge_ns: float = 15.0
    second_dot_ns: float = 15.0
    digital_sum_ns: float = 15.0

    # area
    cell_um: tuple = (3.9, 4.9)
    array_mm2: float = 0.08
    relu_converter_mm2: float = 0.01
    signed_converter_mm2: float = 0.02
    head_mm2: float = 0.5               # projected oxide-transistor head

    # GPU reference measurements (12 heads, one decode token)
    gpu_latency_ns: dict = field(default_factory=lambda: {
        "jetson_nano": 65.0 * 7000.0,
        "rtx_4090": 65.0 * 300.0,
    })
    gpu_energy_pj: dict = field(default_factory=lambda: {
        "jetson_nano": 12 * 6150.0 * 40000.0,
        "rtx_4090": 12 * 6150.0 * 90000.0,
    })
    expected_speedup: dict = field(default_factory=lambda: {
        "jetson_nano": 7000.0, "rtx_4090": 300.0})
    expected_energy_ratio: dict = field(default_factory=lambda: {
        "jetson_nano": 40000.0, "rtx_4090": 90000.0})

    @property
    def latency_ns(self) -> float:
        return (self.reset_ns + self.input_ns + self.discharge_ns
                + self.second_dot_ns + self.digital_sum_ns)


@dataclass
class EnergyReport:
    """Per-component and total energy/latency/area for a simulated workload."""

    num_heads: int
    num_tokens: int
    sparsity: float
    components_pj: dict
    head_energy_pj: float
    token_energy_pj: float          # all heads, one token
    total_energy_pj: float          # all heads, all tokens
    latency_ns: float               # one token (heads are parallel)
    total_latency_ns: float
    latency_breakdown_ns: dict
    area: dict
    geometry: dict

    @property
    def head_energy_nj(self) -> float:
        return self.head_energy_pj / 1000.0


def _out_dot_energy(sparsity: float, constants: CostConstants) -> float:
    """Affine in the active fraction, pinned to the design point.

    Calibration: dense figure at the reference sparsity, floor when no pulse
    fires. Sparsities below the reference extrapolate above the dense figure.
    """
    active_ref = 1.0 - constants.reference_sparsity
    if active_ref <= 0:
        raise ValueError("reference_sparsity must be < 1")
    active = 1.0 - sparsity
    span = constants.out_dot_dense_pj - constants.out_dot_floor_pj
    return constants.out_dot_floor_pj + span * (active / active_ref)


def estimate(config=None, num_heads: int = 1, num_tokens: int = 1,
             measured_sparsity: float | None = None,
             constants: CostConstants = CostConstants()) -> EnergyReport:
    """Cost of running `num_tokens` decode steps on `num_heads` heads.

    measured_sparsity is the realized zero-pulse fraction from a simulation;
    None uses the design-point reference (so defaults reproduce the nominal
    head energy exactly). Totals scale linearly in heads and tokens; latency
    scales only in tokens. config, when given, is echoed into the report's
    geometry block.
    """
    if num_heads < 1:
        raise ValueError("num_heads must be >= 1")
    if num_tokens < 0:
        raise ValueError("num_tokens must be >= 0")
    sparsity = constants.reference_sparsity if measured_sparsity is None \
        else measured_sparsity
    if not 0.0 <= sparsity <= 1.0:
        raise ValueError(f"sparsity {sparsity} outside [0, 1]")

    components = {
        "score_dot_pj": constants.score_dot_pj,
        "out_dot_pj": _out_dot_energy(sparsity, constants),
        "digital_pj": constants.digital_pj,
        "dac_pj": constants.dac_pj,
    }
    head_pj = float(sum(components.values()))
    geometry = {}
    if config is not None:
        geometry = {"dim": config.dim, "tile_size": config.tile_size,
                    "num_tiles": config.num_tiles, "window": config.window}
    cell_w, cell_h = constants.cell_um
    area = {
        "cell_um2": cell_w * cell_h,
        "array_mm2": constants.array_mm2,
        "relu_converter_mm2": constants.relu_converter_mm2,
        "signed_converter_mm2": constants.signed_converter_mm2,
        "head_mm2": constants.head_mm2,
        "total_mm2": constants.head_mm2 * num_heads,
    }
    breakdown = {
        "reset_ns": constants.reset_ns,
        "input_ns": constants.input_ns,
        "discharge_ns": constants.discharge_ns,
        "second_dot_ns": constants.second_dot_ns,
        "digital_sum_ns": constants.digital_sum_ns,
    }
    return EnergyReport(
        num_heads=num_heads, num_tokens=num_tokens, sparsity=sparsity,
        components_pj=components, head_energy_pj=head_pj,
        token_energy_pj=head_pj * num_heads,
        total_energy_pj=head_pj * num_heads * num_tokens,
        latency_ns=constants.latency_ns,
        total_latency_ns=constants.latency_ns * num_tokens,
        latency_breakdown_ns=breakdown, area=area, geometry=geometry,
    )


def gpu_ratio_report(report: EnergyReport,
                     constants: CostConstants = CostConstants()) -> list[dict]:
    """Stored GPU reference values with the ratios the report implies.

    Only meaningful for the 12-head reference workload; a zero-token report
    yields an empty table. Each row carries the implied ratio next to the
    expected one and a flag when they disagree by more than 20 percent.
    """
    if report.num_heads != 12:
        raise ValueError("GPU references are for a 12-head workload")
    if report.num_tokens == 0:
        return []
    rows = []
    for platform in sorted(constants.gpu_latency_ns):
        implied = constants.gpu_latency_ns[platform] / report.latency_ns
        expected = constants.expected_speedup[platform]
        rows.append({
            "platform": platform, "metric": "latency",
            "gpu_value_ns": constants.gpu_latency_ns[platform],
            "ours_ns": report.latency_ns,
            "implied_ratio": implied, "expected_ratio": expected,
            "within_20pct": bool(abs(implied / expected - 1.0) <= 0.20),
        })
        implied_e = constants.gpu_energy_pj[platform] / report.token_energy_pj
        expected_e = constants.expected_energy_ratio[platform]
        rows.append({
            "platform": platform, "metric": "energy",
            "gpu_value_pj": constants.gpu_energy_pj[platform],
            "ours_pj": report.token_energy_pj,
            "implied_ratio": implied_e, "expected_ratio": expected_e,
            "within_20pct": bool(abs(implied_e / expected_e - 1.0) <= 0.20),
        })
    return rows


def report_rows(report: EnergyReport) -> list[tuple[str, float]]:
    """Flat (metric, value) rows for delimited output; names are stable."""
    rows = [
        ("num_heads", report.num_heads),
        ("num_tokens", report.num_tokens),
        ("sparsity", report.sparsity),
    ]
    rows += [(f"energy_{k}", v) for k, v in report.components_pj.items()]
    rows += [
        ("head_energy_pj", report.head_energy_pj),
        ("token_energy_pj", report.token_energy_pj),
        ("total_energy_pj", report.total_energy_pj),
        ("latency_ns", report.latency_ns),
        ("total_latency_ns", report.total_latency_ns),
    ]
    rows += [(f"latency_{k}", v) for k, v in report.latency_breakdown_ns.items()]
    rows += [(f"area_{k}", v) for k, v in report.area.items()]
    return rows
