"""Command line interface.

Subcommands:
  run          simulate token streams; write traces, a summary, and figures
  compare      score the pipeline against the ideal attention reference
  adapt        re-fit the scaling stages of a device-drifted twin pipeline
  cost         energy / latency / area estimate, with GPU reference ratios
  dump-config  print the effective configuration as JSON

Every command accepts --config (JSON file), overrides --seed/--tokens/--heads,
and --out (report directory, default gcattn-out). Exit codes: 0 success,
1 comparison threshold exceeded, 2 configuration problem.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import figures
from .adapt import HeadPipeline, adapt_scalings
from .attention import MultiTap, run_stream
from .costmodel import estimate, gpu_ratio_report, report_rows
from .oracle import OracleConfig, ideal_decayed_attention
from .runconfig import (ConfigError, RunConfig, apply_ideal_preset,
                        config_to_dict, dump_config, ideal_with_bound,
                        load_config, token_streams)
from .trace import SummaryTap, TraceTap, write_json, write_trace_csv, write_trace_jsonl


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tokens is not None:
        if args.tokens < 0:
            raise ConfigError("--tokens must be >= 0")
        cfg.tokens = args.tokens
    if args.heads is not None:
        if args.heads < 1:
            raise ConfigError("--heads must be >= 1")
        cfg.heads = args.heads
    if getattr(args, "ideal", False):
        cfg = _idealize(cfg)
    return cfg


def _idealize(cfg: RunConfig) -> RunConfig:
    """Idealization preset; file-backed tokens get a measured bound."""
    if cfg.token_source.kind == "file":
        streams = token_streams(cfg, 0)
        peak = max((float(np.max(np.abs(s))) for s in streams if s.size), default=1.0)
        return ideal_with_bound(cfg, max(1.0, peak))
    return apply_ideal_preset(cfg)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    head_cfg = cfg.head_config()

    head_blocks = []
    norms_by_label = {}
    pooled_zero = pooled_pulses = 0
    written = []
    for head in range(cfg.heads):
        trace = TraceTap(cfg.trace_stages)
        summary = SummaryTap(cfg.relu_conv, cfg.signed_conv)
        q_seq, k_seq, v_seq = token_streams(cfg, head)
        run_stream(head_cfg, q_seq, k_seq, v_seq,
                   tap=MultiTap([trace, summary]), seed=cfg.seed + head)
        suffix = "" if cfg.heads == 1 else f"_h{head:02d}"
        csv_path = out / f"trace{suffix}.csv"
        jsonl_path = out / f"trace{suffix}.jsonl"
        write_trace_csv(trace.records, csv_path)
        write_trace_jsonl(trace.records, jsonl_path)
        written += [csv_path, jsonl_path]
        block = {"head": head, **summary.summary()}
        head_blocks.append(block)
        norms_by_label[f"head {head}"] = summary.step_norms
        pooled_zero += summary.zero_pulses
        pooled_pulses += summary.pulses

    aggregate = {
        "steps": cfg.tokens,
        "heads": cfg.heads,
        "realized_sparsity": pooled_zero / pooled_pulses if pooled_pulses else 0.0,
        "output_norm_mean": float(np.mean([b["output_norm_mean"]
                                           for b in head_blocks])),
    }
    summary_path = out / "summary.json"
    write_json({"config": config_to_dict(cfg), "heads": head_blocks,
                "aggregate": aggregate}, summary_path)
    written.append(summary_path)
    written.append(figures.run_figure(norms_by_label, out / "run.png"))
    written.append(figures.converter_figure(cfg.relu_conv, cfg.signed_conv,
                                            out / "converters.png"))

    print(f"ran {cfg.heads} head(s) x {cfg.tokens} token(s)")
    print(f"realized sparsity {aggregate['realized_sparsity']:.4f}, "
          f"mean output norm {aggregate['output_norm_mean']:.4g}")
    for path in written:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _digitization_budget(cfg: RunConfig, ideal_norm: float, n_values: int) -> float:
    """RMS error expected from the two output-side digitization stages.

    Counter flooring contributes a uniform [0, grid) error per tile per
    component before the output scaling; the output quantizer adds a uniform
    rounding error of one step. Earlier stages (input quantizer, converter
    saturation) are not covered, so measured error above this floor points at
    those.
    """
    grid = cfg.signed_conv.grid_ns
    per_component = (cfg.out_scale.a ** 2) * grid ** 2 * cfg.num_tiles / 3.0 \
        + cfg.output_quant.step ** 2 / 12.0
    return float(np.sqrt(per_component * n_values) / max(ideal_norm, 1e-18))


def cmd_compare(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    head_cfg = cfg.head_config()
    q_seq, k_seq, v_seq = token_streams(cfg, 0)

    actual = run_stream(head_cfg, q_seq, k_seq, v_seq, seed=cfg.seed)
    oracle_cfg = OracleConfig(dim=cfg.dim, window=head_cfg.window,
                              activation="relu", scale=True)
    ideal = ideal_decayed_attention(q_seq, k_seq, v_seq, oracle_cfg,
                                    tau=cfg.device.tau, dt=cfg.device.dt)

    # Per-step errors share one normalizer (the RMS ideal step norm), so a
    # step whose ideal output happens to be the zero vector stays well
    # defined and the RMS of the per-step errors equals the aggregate.
    diff = actual - ideal
    ideal_norm = float(np.linalg.norm(ideal))
    steps = len(diff)
    rms_norm = max(ideal_norm / np.sqrt(steps) if steps else 0.0, 1e-18)
    abs_errors = [float(np.linalg.norm(diff[t])) for t in range(steps)]
    step_errors = [err / rms_norm for err in abs_errors]
    aggregate = float(np.linalg.norm(diff) / max(ideal_norm, 1e-18))
    budget = _digitization_budget(cfg, ideal_norm, ideal.size) if ideal.size else 0.0

    lines = ["step,abs_error,ideal_norm,norm_error"]
    lines += [f"{t},{abs_errors[t]!r},{float(np.linalg.norm(ideal[t]))!r},"
              f"{step_errors[t]!r}" for t in range(steps)]
    csv_path = out / "compare.csv"
    csv_path.write_text("\n".join(lines) + "\n")

    passed = args.threshold is None or aggregate <= args.threshold
    payload = {
        "aggregate_rel_error": aggregate,
        "max_step_norm_error": max(step_errors, default=0.0),
        "digitization_budget": budget,
        "threshold": args.threshold,
        "passed": passed,
        "steps": steps,
    }
    write_json(payload, out / "compare.json")
    figures.compare_figure(step_errors, budget, out / "compare.png")

    print(f"aggregate relative error {aggregate:.3e} over {steps} steps "
          f"(max step {payload['max_step_norm_error']:.3e})")
    print(f"output digitization budget {budget:.3e}")
    for name in ("compare.csv", "compare.json", "compare.png"):
        print(f"wrote {out / name}")
    if args.threshold is not None:
        print(f"threshold {args.threshold:.3e}: {'pass' if passed else 'FAIL'}")
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# adapt
# ---------------------------------------------------------------------------

def _probe_streams(cfg: RunConfig, count: int, tokens: int):
    """Gaussian probe streams for adaptation, independent of the run stream."""
    streams = []
    for index in range(count):
        rng = np.random.default_rng([cfg.seed, 1 + index])
        shape = (tokens, cfg.dim)
        streams.append(tuple(
            rng.normal(cfg.token_source.mean, cfg.token_source.std, shape)
            for _ in range(3)))
    return streams


def cmd_adapt(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)

    base = cfg.head_config()
    reference = dataclasses.replace(base, device=dataclasses.replace(
        base.device, kind="linear"))
    target = dataclasses.replace(base, device=dataclasses.replace(
        base.device, kind="cubic"))
    ref_pipe = HeadPipeline(config=reference, seed=cfg.seed)
    tgt_pipe = HeadPipeline(config=target, seed=cfg.seed)

    samples = _probe_streams(cfg, cfg.adapt.samples, cfg.adapt.sample_tokens)
    probe = _probe_streams(cfg, cfg.adapt.samples + 1, cfg.adapt.sample_tokens)[-1]

    ref_out = ref_pipe.output(probe)
    pre_err = _stream_error(tgt_pipe.output(probe), ref_out)
    adapted, report = adapt_scalings(ref_pipe, tgt_pipe, samples,
                                     tol=cfg.adapt.tol,
                                     max_iter=cfg.adapt.max_iter)
    post_err = _stream_error(adapted.output(probe), ref_out)

    stage_names = ("q", "k", "v", "out")
    payload = {
        "converged": report.converged,
        "iterations": report.iterations,
        "updates": report.updates,
        "tol": report.tol,
        "sigma_gaps": report.sigma_gaps,
        "mean_gaps": report.mean_gaps,
        "history": report.history,
        "degenerate_stages": report.degenerate_stages,
        "pre_error": pre_err,
        "post_error": post_err,
        "stages_before": {n: {"a": s.a, "b": s.b}
                          for n, s in zip(stage_names, tgt_pipe.stages)},
        "stages_after": {n: {"a": s.a, "b": s.b}
                         for n, s in zip(stage_names, adapted.stages)},
    }
    write_json(payload, out / "adapt_report.json")
    write_json({"scalings": payload["stages_after"]}, out / "scalings.json")
    figures.adapt_figure(report, out / "adapt.png")

    state = "converged" if report.converged else "did NOT converge"
    print(f"adaptation {state} in {report.iterations} round(s), "
          f"{report.updates} update(s), tol {report.tol:g}")
    print(f"output error vs linear reference: {pre_err:.3e} before, "
          f"{post_err:.3e} after")
    for name in ("adapt_report.json", "scalings.json", "adapt.png"):
        print(f"wrote {out / name}")
    return 0


def _stream_error(out_a: np.ndarray, out_b: np.ndarray) -> float:
    return float(np.linalg.norm(out_a - out_b)
                 / max(np.linalg.norm(out_b), 1e-18))


# ---------------------------------------------------------------------------
# cost
# ---------------------------------------------------------------------------

def _resolve_sparsity(args, cfg: RunConfig):
    if args.sparsity is not None and args.from_run:
        raise ConfigError("--sparsity and --from-run are mutually exclusive")
    if args.sparsity is not None:
        if not 0.0 <= args.sparsity <= 1.0:
            raise ConfigError("--sparsity must be within [0, 1]")
        return args.sparsity
    if args.from_run:
        summary_path = Path(args.from_run) / "summary.json"
        try:
            data = json.loads(summary_path.read_text())
            return float(data["aggregate"]["realized_sparsity"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise ConfigError(
                f"cannot read realized sparsity from {summary_path}: {err}") from err
    return cfg.cost.sparsity


def cmd_cost(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    sparsity = _resolve_sparsity(args, cfg)

    report = estimate(cfg.head_config(), num_heads=cfg.heads,
                      num_tokens=cfg.tokens, measured_sparsity=sparsity,
                      constants=cfg.cost_constants())
    rows = report_rows(report)
    gpu_rows = gpu_ratio_report(report, cfg.cost_constants()) \
        if cfg.heads == 12 else []
    for row in gpu_rows:
        rows.append((f"gpu_{row['platform']}_{row['metric']}_ratio",
                     row["implied_ratio"]))
        rows.append((f"gpu_{row['platform']}_{row['metric']}_expected",
                     row["expected_ratio"]))

    csv_path = out / "cost.csv"
    csv_path.write_text("\n".join(["metric,value"]
                                  + [f"{k},{v!r}" for k, v in rows]) + "\n")
    write_json({"report": dataclasses.asdict(report), "gpu": gpu_rows},
               out / "cost.json")
    figures.cost_figure(report, gpu_rows, out / "cost.png")

    print(f"head energy {report.head_energy_nj:.4g} nJ/token "
          f"({report.token_energy_pj:.4g} pJ across {report.num_heads} head(s))")
    print(f"total {report.total_energy_pj / 1e6:.4g} uJ over {report.num_tokens} "
          f"token(s), latency {report.latency_ns:.4g} ns/token")
    print(f"sparsity used: {report.sparsity:.4f}")
    if gpu_rows:
        for row in gpu_rows:
            mark = "ok" if row["within_20pct"] else "OFF"
            print(f"  vs {row['platform']} {row['metric']}: "
                  f"{row['implied_ratio']:.0f}x (expected {row['expected_ratio']:.0f}x, "
                  f"{mark})")
    else:
        print("GPU reference ratios need exactly 12 heads; skipped")
    for name in ("cost.csv", "cost.json", "cost.png"):
        print(f"wrote {out / name}")
    return 0


# ---------------------------------------------------------------------------
# dump-config
# ---------------------------------------------------------------------------

def cmd_dump_config(args) -> int:
    cfg = _resolve_config(args)
    text = dump_config(cfg)
    sys.stdout.write(text)
    if args.out is not None:
        out = _out_dir(args)
        path = out / "config.json"
        path.write_text(text)
        print(f"wrote {path}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcattn",
        description="Behavioral simulator of an analog in-memory attention head")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config file")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("--tokens", type=int, help="override token count")
    common.add_argument("--heads", type=int, help="override head count")
    common.add_argument("--ideal", action="store_true",
                        help="swap in the idealization preset")

    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common],
                           help="simulate and write traces + summary + figures")
    p_run.add_argument("--out", default="gcattn-out", help="report directory")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", parents=[common],
                           help="score the pipeline against ideal attention")
    p_cmp.add_argument("--out", default="gcattn-out", help="report directory")
    p_cmp.add_argument("--threshold", type=float,
                       help="exit 1 if aggregate relative error exceeds this")
    p_cmp.set_defaults(func=cmd_compare)

    p_adp = sub.add_parser("adapt", parents=[common],
                           help="re-fit scalings of a cubic-device twin")
    p_adp.add_argument("--out", default="gcattn-out", help="report directory")
    p_adp.set_defaults(func=cmd_adapt)

    p_cost = sub.add_parser("cost", parents=[common],
                            help="energy / latency / area estimate")
    p_cost.add_argument("--out", default="gcattn-out", help="report directory")
    p_cost.add_argument("--sparsity", type=float,
                        help="score-pulse zero fraction to cost, in [0, 1]")
    p_cost.add_argument("--from-run", metavar="DIR",
                        help="take realized sparsity from a run's summary.json")
    p_cost.set_defaults(func=cmd_cost)

    p_dump = sub.add_parser("dump-config", parents=[common],
                            help="print the effective configuration")
    p_dump.add_argument("--out", default=None, help="also write config.json here")
    p_dump.set_defaults(func=cmd_dump_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
