"""The four plot kinds: waveforms, estimates_overlay, error_profile, sweep_curve.

Colour convention matches the source figures: yellow/gold for true voltages,
blue for the conventional estimator, red for the proposed (compensated) one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schema import KIND_LABELS, SchemaError, SweepTable, TimeSeries

PLOT_KINDS = ("waveforms", "estimates_overlay", "error_profile", "sweep_curve")

KIND_COLORS = {"conv": "tab:blue", "comp": "tab:red"}
TRUE_COLOR = "gold"


@dataclass
class PlotSpec:
    """One rendering job: input CSV, plot kind, output image."""

    csv_path: str
    kind: str
    out_path: str
    arm: str = "u"
    xlabel: str | None = None
    ylabel: str | None = None
    title: str | None = None
    annotation: str | None = None  # small reproducibility footer

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise SchemaError(
                f"unknown plot kind {self.kind!r}; expected one of {PLOT_KINDS}")
        if self.arm not in ("u", "l"):
            raise SchemaError(f"arm must be 'u' or 'l', got {self.arm!r}")


def _finish(fig, ax_last, spec: PlotSpec):
    if spec.xlabel:
        ax_last.set_xlabel(spec.xlabel)
    if spec.title:
        fig.suptitle(spec.title)
    if spec.annotation:
        fig.text(0.99, 0.01, spec.annotation, ha="right", va="bottom",
                 fontsize=7, color="0.5")
    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out


def _plot_waveforms(spec: PlotSpec):
    ts = TimeSeries.load(spec.csv_path)
    ts.require_scalars(("v_arm_u", "v_arm_l", "i_out"), spec.csv_path)
    fig, (ax_v, ax_i) = plt.subplots(2, 1, sharex=True, figsize=(9, 5))
    v_phase = 0.5 * (ts.scalars["v_arm_l"] - ts.scalars["v_arm_u"])
    ax_v.plot(ts.t, v_phase, lw=0.6, color="tab:purple")
    ax_v.set_ylabel(spec.ylabel or "phase voltage [V]")
    ax_i.plot(ts.t, ts.scalars["i_out"], lw=0.8, color="tab:green")
    ax_i.set_ylabel("load current [A]")
    ax_i.set_xlabel(spec.xlabel or "time [s]")
    for ax in (ax_v, ax_i):
        ax.grid(alpha=0.3)
    return _finish(fig, ax_i, spec)


def _plot_estimates_overlay(spec: PlotSpec):
    ts = TimeSeries.load(spec.csv_path)
    truth = ts.vc_true[spec.arm]
    fig, ax = plt.subplots(figsize=(9, 5))
    for j in range(ts.n_modules):
        ax.plot(ts.t, truth[:, j], color=TRUE_COLOR, lw=1.4,
                label="true" if j == 0 else None, zorder=1)
    for kind, per_arm in ts.vc_est.items():
        if spec.arm not in per_arm:
            continue
        est = per_arm[spec.arm]
        for j in range(est.shape[1]):
            ax.plot(ts.t, est[:, j], color=KIND_COLORS[kind], lw=0.6,
                    label=KIND_LABELS[kind] if j == 0 else None, zorder=2)
    ax.set_ylabel(spec.ylabel or "module voltage [V]")
    ax.set_xlabel(spec.xlabel or "time [s]")
    ax.grid(alpha=0.3)
    if truth.size:
        ax.legend(loc="best")
    return _finish(fig, ax, spec)


def _plot_error_profile(spec: PlotSpec):
    ts = TimeSeries.load(spec.csv_path)
    if not ts.maxerr:
        raise SchemaError(f"{spec.csv_path}: missing column 'maxerr_conv' or "
                          "'maxerr_comp'")
    fig, ax = plt.subplots(figsize=(9, 4))
    for kind, series in ts.maxerr.items():
        ax.plot(ts.t, series, color=KIND_COLORS[kind], lw=0.8,
                label=KIND_LABELS[kind])
    ax.set_ylabel(spec.ylabel or "max estimation error [V]")
    ax.set_xlabel(spec.xlabel or "time [s]")
    ax.grid(alpha=0.3)
    if ts.t.size:
        ax.legend(loc="best")
    return _finish(fig, ax, spec)


def _plot_sweep_curve(spec: PlotSpec):
    table = SweepTable.load(spec.csv_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for kind, series in table.mean_err.items():
        ax.plot(table.param, series, "o-", color=KIND_COLORS[kind],
                label=KIND_LABELS[kind])
    ax.set_xlabel(spec.xlabel or table.param_name)
    ax.set_ylabel(spec.ylabel or "mean max estimation error [V]")
    if table.param.size and np.all(table.param > 0):
        ax.set_xscale("log")
    finite = np.concatenate([s[np.isfinite(s)] for s in table.mean_err.values()]) \
        if table.mean_err else np.array([])
    if finite.size and np.all(finite > 0):
        ax.set_yscale("log")
    ax.grid(alpha=0.3, which="both")
    if table.param.size:
        ax.legend(loc="best")
    return _finish(fig, ax, spec)


_RENDERERS = {
    "waveforms": _plot_waveforms,
    "estimates_overlay": _plot_estimates_overlay,
    "error_profile": _plot_error_profile,
    "sweep_curve": _plot_sweep_curve,
}


def render(spec: PlotSpec) -> Path:
    """Render one figure; returns the written image path."""
    return _RENDERERS[spec.kind](spec)
