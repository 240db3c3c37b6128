"""Figure rendering for the CLI report path.

Kept out of the core library: runners return data, the CLI decides whether
to render. All figures go to files (Agg backend, no display server needed).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .accounting import bpp_series, dtr_theoretical
from .runner import RunReport, SweepCell

__all__ = ["render_dtr_figure", "render_run_figure", "render_sweep_figure"]

_DPI = 150


def _mb(bits: int | float) -> float:
    return bits / 8 / 1_000_000


def render_run_figure(report: RunReport, path: str | Path, title: str = "") -> Path:
    """Accuracy, transmitted volume, and bits-per-parameter panels for a run."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    rounds = [r.round_index for r in report.records]
    accuracy = [r.test_accuracy for r in report.records]
    cumulative_mb = [_mb(r.cumulative_bits) for r in report.records]
    series = bpp_series(report.ledger, report.param_count)

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    ax = axes[0][0]
    ax.plot(rounds, accuracy, color="tab:blue")
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.set_title("accuracy per round")
    ax.grid(alpha=0.3)

    ax = axes[0][1]
    ax.plot(rounds, cumulative_mb, color="tab:orange")
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative MB")
    ax.set_title("transmitted volume")
    ax.grid(alpha=0.3)

    ax = axes[1][0]
    ax.plot([s.round_index for s in series], [s.down_bpp for s in series], label="down")
    ax.plot([s.round_index for s in series], [s.up_bpp for s in series], label="up")
    ax.plot(
        [s.round_index for s in series],
        [s.running_average for s in series],
        label="running mean",
        linestyle="--",
        color="black",
    )
    ax.set_yscale("log")
    ax.set_xlabel("round")
    ax.set_ylabel("bits per parameter")
    ax.set_title("per-round bpp")
    ax.grid(alpha=0.3, which="both")
    ax.legend()

    ax = axes[1][1]
    ax.plot(cumulative_mb, accuracy, color="tab:green")
    ax.set_xlabel("cumulative MB")
    ax.set_ylabel("test accuracy")
    ax.set_title("accuracy vs volume")
    ax.grid(alpha=0.3)

    fig.suptitle(title or f"{report.method} run (total DTR {report.dtr.total_dtr:.2f})")
    fig.tight_layout()
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def render_sweep_figure(cells: list[SweepCell], path: str | Path) -> Path:
    """Final accuracy against total DTR for every sweep cell."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 5))
    xs = [cell.report.dtr.total_dtr for cell in cells]
    ys = [cell.report.final_accuracy for cell in cells]
    ax.scatter(xs, ys, color="tab:blue")
    for cell, x, y in zip(cells, xs, ys):
        label = ",".join(f"{k}={v}" for k, v in cell.axis_values.items())
        ax.annotate(label, (x, y), fontsize=8, xytext=(4, 4), textcoords="offset points")
    ax.set_xlabel("total DTR")
    ax.set_ylabel("final test accuracy")
    ax.set_title("sweep: accuracy vs transmission reduction")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target


def render_dtr_figure(
    param_count: int,
    clusters: int,
    f1: float,
    f2: float,
    wordlength: int,
    empirical_total_dtr: float,
    path: str | Path,
) -> Path:
    """Closed-form DTR against combined exchange frequency, run marked."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    freqs = [i / 100 for i in range(1, 201)]
    curve = [dtr_theoretical(param_count, clusters, f / 2, f / 2, wordlength) for f in freqs]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.plot(freqs, curve, label=f"theoretical, K={clusters}")
    ax.scatter(
        [f1 + f2],
        [empirical_total_dtr],
        color="tab:red",
        zorder=3,
        label=f"this schedule (f1={f1}, f2={f2})",
    )
    ax.set_xlabel("f1 + f2")
    ax.set_ylabel("total DTR")
    ax.set_yscale("log")
    ax.set_title("transmission reduction vs exchange frequency")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(target, dpi=_DPI)
    plt.close(fig)
    return target
