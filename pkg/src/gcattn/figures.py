"""Matplotlib figure rendering for the CLI report paths.

Every function writes one PNG and returns its path. The Agg backend is
forced so rendering works headless; figures are closed after saving.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .crossbar import (floor_to_grid, relu_transfer, signed_transfer)

_DPI = 120


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def converter_figure(relu_spec, signed_spec, path):
    """Transfer curves of both charge-to-pulse converters, pre and post grid."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    s = np.linspace(-1.5 * relu_spec.s_sat, 1.5 * relu_spec.s_sat, 801)
    ideal = relu_transfer(s, relu_spec)
    ax1.plot(s, ideal, label="pulse width")
    ax1.plot(s, floor_to_grid(ideal, relu_spec), lw=0.8, label="on counter grid")
    ax1.axvline(relu_spec.s_sat, color="gray", ls=":", lw=0.8)
    ax1.set_title("rectifying converter")
    ax1.set_xlabel("bit-line charge")
    ax1.set_ylabel("pulse width (ns)")
    ax1.legend(fontsize=8)

    s2 = np.linspace(-1.5 * signed_spec.s_sat, 1.5 * signed_spec.s_sat, 801)
    width, sign = signed_transfer(s2, signed_spec)
    ax2.plot(s2, sign * width, label="signed width")
    ax2.plot(s2, sign * floor_to_grid(width, signed_spec), lw=0.8,
             label="on counter grid")
    ax2.axvline(signed_spec.s_sat, color="gray", ls=":", lw=0.8)
    ax2.axvline(-signed_spec.s_sat, color="gray", ls=":", lw=0.8)
    ax2.set_title("signed converter")
    ax2.set_xlabel("bit-line charge")
    ax2.set_ylabel("signed width (ns)")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def run_figure(norms_by_label: dict, path, title="head output norm per step"):
    fig, ax = plt.subplots(figsize=(7, 3.2))
    for label, norms in norms_by_label.items():
        ax.plot(np.arange(len(norms)), norms, lw=1.0, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("output L2 norm")
    ax.set_title(title)
    if norms_by_label:
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def compare_figure(errors, budget, path):
    """Per-step relative error against the ideal reference, log scale."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    errors = np.asarray(errors, dtype=float)
    positive = np.maximum(errors, 1e-18)
    ax.semilogy(np.arange(len(errors)), positive, lw=1.0, label="per-step error")
    if budget is not None:
        ax.axhline(budget, color="tab:red", ls="--", lw=0.9,
                   label="quantization budget")
    ax.set_xlabel("step")
    ax.set_ylabel("relative L2 error")
    ax.set_title("pipeline vs ideal reference")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def adapt_figure(report, path):
    """Worst per-stage gaps per adaptation round."""
    fig, ax = plt.subplots(figsize=(7, 3.2))
    rounds = np.arange(1, len(report.history) + 1)
    sigma = [max(row["sigma_gaps"]) for row in report.history]
    mean = [max(row["mean_gaps"]) for row in report.history]
    ax.semilogy(rounds, np.maximum(sigma, 1e-18), marker="o", label="max spread gap")
    ax.semilogy(rounds, np.maximum(mean, 1e-18), marker="s", label="max mean gap")
    ax.axhline(report.tol, color="tab:red", ls="--", lw=0.9, label="tolerance")
    ax.set_xlabel("round")
    ax.set_ylabel("gap")
    ax.set_title(f"adaptation ({'converged' if report.converged else 'not converged'} "
                 f"in {report.iterations} rounds)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def cost_figure(report, gpu_rows, path):
    """Energy breakdown per head; GPU ratio bars when reference rows exist."""
    panels = 2 if gpu_rows else 1
    fig, axes = plt.subplots(1, panels, figsize=(4.5 * panels, 3.6))
    ax1 = axes[0] if panels == 2 else axes
    names = list(report.components_pj)
    values = [report.components_pj[n] for n in names]
    ax1.bar(range(len(names)), values, color="tab:blue")
    ax1.set_xticks(range(len(names)))
    ax1.set_xticklabels([n.removesuffix("_pj") for n in names], rotation=20)
    ax1.set_ylabel("energy per head per token (pJ)")
    ax1.set_title(f"head energy {report.head_energy_nj:.3g} nJ")

    if gpu_rows:
        ax2 = axes[1]
        labels = [f"{r['platform']}\n{r['metric']}" for r in gpu_rows]
        implied = [r["implied_ratio"] for r in gpu_rows]
        expected = [r["expected_ratio"] for r in gpu_rows]
        x = np.arange(len(labels))
        ax2.bar(x - 0.2, implied, width=0.4, label="implied", color="tab:blue")
        ax2.bar(x + 0.2, expected, width=0.4, label="expected", color="tab:orange")
        ax2.set_yscale("log")
        ax2.set_xticks(x)
        ax2.set_xticklabels(labels, fontsize=7)
        ax2.set_ylabel("advantage over GPU (x)")
        ax2.set_title("GPU reference ratios")
        ax2.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
