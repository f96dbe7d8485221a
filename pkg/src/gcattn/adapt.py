"""Statistics-matching adaptation of scaling stages.

Parameters trained against an ideal linear pipeline drift when executed on a
nonlinear device: every scaling stage's output distribution shifts and
stretches. Adaptation is gradient-free distribution matching. Run the same
samples through a linear-device reference pipeline and through the nonlinear
target, measure each stage's output mean and standard deviation, and correct
every stage simultaneously:

    a <- a * sigma_ref / sigma_target
    b <- b + (mean_ref - mean_target)

then re-measure and repeat. Stage outputs are observed after the affine map
but before any clipping or quantization, so the statistics see the full
distribution. Convergence requires, for every stage,

    |sigma_target / sigma_ref - 1| <= tol
    |mean_target - mean_ref|       <= tol * max(sigma_ref, EPS)

A stage whose target deviation collapses below EPS is degenerate: its gain is
left alone (the ratio update is undefined) and only the offset is corrected.
The same guard applies when the reference deviation collapses, since scaling
a toward zero would destroy the stage.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .attention import SCALE_TAGS, AttentionHeadConfig, RecordingTap, run_stream
from .signal import ScalingStage

EPS = 1e-12


@dataclass(frozen=True)
class StageStats:
    """Pooled first and second moments of one stage's outputs."""

    mean: float
    std: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("stage statistics need at least two pooled values")


@dataclass
class AdaptReport:
    """What the adaptation loop did and how far it got.

    iterations counts measurement rounds (an already-matched target converges
    at iteration 1 with no update applied). sigma_gaps / mean_gaps are the
    final measured per-stage gaps; history holds one row per round so
    convergence can be plotted.
    """

    iterations: int
    converged: bool
    tol: float
    updates: int = 0
    sigma_gaps: list = field(default_factory=list)
    mean_gaps: list = field(default_factory=list)
    history: list = field(default_factory=list)
    degenerate_stages: list = field(default_factory=list)


def collect_stats(pipeline, samples) -> list[StageStats]:
    """Pool every scaling stage's post-scale outputs over the sample set.

    A pipeline exposes `stages` (its ScalingStage list) and
    `stage_outputs(sample)` returning one array per stage. Moments are pooled
    over all samples and vector components, in sample order, with numpy's
    pairwise summation keeping the accumulation reproducible.
    """
    if len(pipeline.stages) < 1:
        raise ValueError("pipeline has no scaling stages")
    samples = list(samples)
    if not samples:
        raise ValueError("need at least one sample")
    pools = [[] for _ in pipeline.stages]
    for sample in samples:
        outs = pipeline.stage_outputs(sample)
        if len(outs) != len(pipeline.stages):
            raise ValueError(
                f"pipeline produced {len(outs)} stage outputs for "
                f"{len(pipeline.stages)} stages")
        for pool, out in zip(pools, outs):
            pool.append(np.asarray(out, dtype=float).ravel())
    stats = []
    for pool in pools:
        values = np.concatenate(pool)
        stats.append(StageStats(mean=float(values.mean()),
                                std=float(values.std()),
                                count=values.size))
    return stats


def _gaps(ref: StageStats, tgt: StageStats, tol: float):
    """(sigma gap, mean gap, mean tolerance, converged) for one stage."""
    if ref.std <= EPS or tgt.std <= EPS:
        sigma_gap = 0.0 if (ref.std <= EPS and tgt.std <= EPS) else np.inf
    else:
        sigma_gap = abs(tgt.std / ref.std - 1.0)
    mean_gap = abs(tgt.mean - ref.mean)
    mean_tol = tol * max(ref.std, EPS)
    return sigma_gap, mean_gap, mean_tol, (sigma_gap <= tol and mean_gap <= mean_tol)


def adapt_scalings(reference, target, samples, tol: float = 0.05,
                   max_iter: int = 50):
    """Match the target pipeline's stage statistics to the reference's.

    Returns (adapted copy of target, AdaptReport). The reference pipeline is
    never modified and its statistics are measured once (it does not change
    between rounds). If the target already matches within tol, nothing is
    updated and the report shows convergence at iteration 1.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    samples = list(samples)
    target = copy.deepcopy(target)
    ref_stats = collect_stats(reference, samples)
    if len(ref_stats) != len(target.stages):
        raise ValueError("reference and target stage counts differ")

    report = AdaptReport(iterations=0, converged=False, tol=tol)
    degenerate = set()
    for round_index in range(1, max_iter + 1):
        tgt_stats = collect_stats(target, samples)
        rows = [_gaps(r, t, tol) for r, t in zip(ref_stats, tgt_stats)]
        report.iterations = round_index
        report.sigma_gaps = [r[0] for r in rows]
        report.mean_gaps = [r[1] for r in rows]
        report.history.append(
            {"sigma_gaps": report.sigma_gaps, "mean_gaps": report.mean_gaps})
        if all(r[3] for r in rows):
            report.converged = True
            break
        new_stages = []
        for index, (stage, ref, tgt) in enumerate(
                zip(target.stages, ref_stats, tgt_stats)):
            if tgt.std <= EPS or ref.std <= EPS:
                degenerate.add(index)
                gain = stage.a
            else:
                gain = stage.a * (ref.std / tgt.std)
            new_stages.append(ScalingStage(a=gain, b=stage.b + (ref.mean - tgt.mean)))
        target.stages = new_stages
        report.updates += 1
    report.degenerate_stages = sorted(degenerate)
    return target, report


class ChainPipeline:
    """Toy pipeline: scaling stages interleaved with elementwise links.

    Topology: x -> stage_0 -> link_0 -> stage_1 -> link_1 -> ... The stage
    outputs (pre-link) are what adaptation observes; `output` returns the end
    of the chain. A link of None is the identity.
    """

    def __init__(self, stages, links=None):
        self.stages = list(stages)
        self.links = list(links) if links is not None else [None] * len(self.stages)
        if len(self.links) != len(self.stages):
            raise ValueError("need one link per stage (None for identity)")

    def stage_outputs(self, sample):
        value = np.asarray(sample, dtype=float)
        outs = []
        for stage, link in zip(self.stages, self.links):
            value = stage.a * value + stage.b
            outs.append(value)
            if link is not None:
                value = link(value)
        self._last = value
        return outs

    def output(self, sample):
        self.stage_outputs(sample)
        return self._last


class HeadPipeline:
    """Adapter exposing an attention head's four scaling stages to adaptation.

    Stage order is query, key, value, output. A sample is one token stream
    (q_seq, k_seq, v_seq); stage outputs are pooled over the whole stream.
    """

    _FIELDS = ("q_scale", "k_scale", "v_scale", "out_scale")

    def __init__(self, config: AttentionHeadConfig, seed: int = 0):
        self.config = config
        self.seed = seed

    @property
    def stages(self):
        return [getattr(self.config, name) for name in self._FIELDS]

    @stages.setter
    def stages(self, new_stages):
        if len(new_stages) != len(self._FIELDS):
            raise ValueError(f"expected {len(self._FIELDS)} stages")
        for name, stage in zip(self._FIELDS, new_stages):
            setattr(self.config, name, stage)

    def stage_outputs(self, sample):
        q_seq, k_seq, v_seq = sample
        tap = RecordingTap(tags=SCALE_TAGS)
        run_stream(self.config, q_seq, k_seq, v_seq, tap=tap, seed=self.seed)
        return [np.concatenate([rec[2] for rec in tap.by_tag(tag)])
                for tag in SCALE_TAGS]

    def output(self, sample):
        q_seq, k_seq, v_seq = sample
        return run_stream(self.config, q_seq, k_seq, v_seq, seed=self.seed)
