"""Figure rendering for the report paths.

Every CLI report that writes delimited output also renders a matplotlib
figure next to it. All plotting goes through the Agg backend so the
package never needs a display.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport, SweepResult
from .plant import Trajectory

_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)


def plot_dataset_overview(traj: Trajectory, path, probe_idx: int | None = None) -> None:
    """States, input and parameter stair signals on a shared time axis."""
    n_p = traj.params.shape[0]
    fig, axes = plt.subplots(2 + n_p, 1, figsize=(8, 6), sharex=True)
    t = traj.times()
    axes[0].plot(t, traj.states.T, lw=0.3, color="steelblue", alpha=0.4)
    if probe_idx is not None:
        axes[0].plot(t, traj.states[probe_idx], lw=1.2, color="goldenrod",
                     label=f"probe state {probe_idx + 1}")
        axes[0].legend(loc="upper right", fontsize=8)
    axes[0].set_ylabel("T")
    axes[1].step(t[:-1], traj.inputs, where="post", lw=0.8, color="black")
    axes[1].set_ylabel("u")
    for i in range(n_p):
        axes[2 + i].step(t[:-1], traj.params[i], where="post", lw=0.8, color="firebrick")
        axes[2 + i].set_ylabel(f"p{i + 1}" if n_p > 1 else "p")
    axes[-1].set_xlabel("time [s]")
    fig.align_ylabels(axes)
    _save(fig, path)


def _sweep_axis(sweep: SweepResult):
    if sweep.kind == "procrustes":
        return [p.rank_pr_eff if p.rank_pr is None else p.rank_pr
                for p in sweep.points], "Procrustes rank"
    return [p.rank_pod for p in sweep.points], "rank"


def plot_rank_sweep(sweeps, path, title: str = "", xlabel: str | None = None) -> None:
    """Log-scale training/one-step MSE against rank, one curve per sweep.

    ``sweeps`` is a list of (label, SweepResult) pairs.
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    label_x = xlabel
    for label, sweep in sweeps:
        xs, default_x = _sweep_axis(sweep)
        label_x = label_x or default_x
        mses = [p.mse for p in sweep.points]
        ax.semilogy(xs, mses, marker="o", ms=4, lw=1, label=label)
    ax.set_xlabel(label_x or "rank")
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_probe_comparison(reports, path, title: str = "") -> None:
    """Probe-point time series: truth once, one curve per model report.

    ``reports`` is a list of (label, EvalReport) pairs; reports must carry a
    probe series. Diverged runs plot their pre-divergence prefix.
    """
    fig, ax = plt.subplots(figsize=(7, 4))
    drew_truth = False
    for label, report in reports:
        series = report.probe_series
        if series is None:
            continue
        if not drew_truth:
            ax.plot(series[0], series[1], color="black", lw=1.4, label="plant")
            drew_truth = True
        suffix = " (diverged)" if report.diverged else ""
        ax.plot(series[0], series[2], lw=0.9, alpha=0.9, label=label + suffix)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("T at probe")
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)
