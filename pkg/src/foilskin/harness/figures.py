"""Report figures, rendered off-screen to PNG."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics import GRID_AMPLITUDES, GRID_PERIODS, GRID_WAVEFORMS, phase_average  # noqa: E402

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}
COLORS = {"setpoint": "0.35", "truth": "tab:blue", "estimate": "tab:orange"}
# no timestamps or version strings so reruns give identical files
PNG_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_step(record, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(record.t, record.setpoint, color=COLORS["setpoint"], ls="--", lw=1, label="set point")
    ax.plot(record.t, record.estimate, color=COLORS["estimate"], lw=0.6, alpha=0.8, label="e-skin estimate")
    ax.plot(record.t, record.truth, color=COLORS["truth"], lw=1.2, label="ground truth")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("camber [%]")
    ax.legend(loc="lower right")
    return _save(fig, path)


def plot_tracking(records, amplitude: float, path: Path) -> Path:
    """Phase-averaged cycles for one amplitude: waveforms by row, periods by column."""
    fig, axes = plt.subplots(len(GRID_WAVEFORMS), len(GRID_PERIODS), figsize=(9, 4.8),
                             sharey=True, squeeze=False)
    for r in records:
        p = r.profile
        if p.kind == "step" or p.peak_to_peak != amplitude or p.period not in GRID_PERIODS:
            continue
        ax = axes[GRID_WAVEFORMS.index(p.kind)][GRID_PERIODS.index(p.period)]
        for name in ("setpoint", "truth", "estimate"):
            pa = phase_average(getattr(r, name), p.period, r.dt, bins=200)
            ax.plot(pa.phase, pa.mean, color=COLORS[name], lw=1.0 if name != "setpoint" else 0.8,
                    ls="--" if name == "setpoint" else "-", label=name)
            if name != "setpoint":
                ax.fill_between(pa.phase, pa.mean - pa.std, pa.mean + pa.std, color=COLORS[name],
                                alpha=0.2, lw=0)
        ax.set_title(f"{p.kind}, T = {p.period:g} s", fontsize=9)
    for ax in axes[-1]:
        ax.set_xlabel("phase [s]")
    for row in axes:
        row[0].set_ylabel("camber [%]")
    axes[0][0].legend(loc="upper right", fontsize=7)
    fig.suptitle(f"peak-to-peak {amplitude:g} %")
    return _save(fig, path)


def plot_sensor_error(report: dict, path: Path) -> Path:
    tip = report["tip"]
    keys = list(tip)
    mid = np.array([np.mean([float(v) for v in k.split("-")]) for k in keys])
    mean = np.array([tip[k]["mean"] for k in keys])
    std = np.array([tip[k]["std"] for k in keys])
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.errorbar(mid, mean, yerr=std, fmt="o", color="tab:blue", capsize=3, label="mean ± σ")
    ax.scatter(mid, [tip[k]["max"] for k in keys], marker="^", color="tab:red", s=18, label="max")
    ax.scatter(mid, [tip[k]["min"] for k in keys], marker="v", color="tab:green", s=18, label="min")
    marker = report.get("marker_mean") or {}
    if marker:
        ax.plot(mid, [marker[k]["mean"] for k in keys], "s", mfc="none", color="0.4", ms=5,
                label="all-marker mean")
    ax.set_xlabel("true camber [%]")
    ax.set_ylabel("tip error [% of foil length]")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_nrmse_grid(rows, path: Path) -> Path:
    fig, axes = plt.subplots(1, len(GRID_WAVEFORMS), figsize=(8, 3), sharey=True, squeeze=False)
    width = 0.35
    for ax, kind in zip(axes[0], GRID_WAVEFORMS):
        x = np.arange(len(GRID_PERIODS))
        for j, amp in enumerate(GRID_AMPLITUDES):
            vals = [next((r["nrmse_truth"] for r in rows if r["waveform"] == kind
                          and r["peak_to_peak"] == amp and r["period"] == T), np.nan)
                    for T in GRID_PERIODS]
            ax.bar(x + (j - 0.5) * width, vals, width, label=f"p2p {amp:g} %")
        ax.set_xticks(x, [f"{T:g} s" for T in GRID_PERIODS])
        ax.set_title(kind, fontsize=9)
        ax.set_xlabel("period")
    axes[0][0].set_ylabel("NRMSE (ground truth)")
    axes[0][0].legend(fontsize=7)
    return _save(fig, path)


def plot_training(loss_csv: Path, path: Path) -> Path:
    with Path(loss_csv).open() as fh:
        rows = list(csv.DictReader(fh))
    fig, ax = plt.subplots(figsize=(5, 3))
    if rows:
        epoch = [int(r["epoch"]) for r in rows]
        ax.semilogy(epoch, [float(r["train_loss"]) for r in rows], label="train")
        ax.semilogy(epoch, [float(r["val_loss"]) for r in rows], label="validation")
        ax.legend()
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (chord units²)")
    return _save(fig, path)


def render_all(out: Path, folder: Path, records, cfg) -> list[Path]:
    out = Path(out)
    with plt.rc_context(STYLE):
        made = [plot_step(records[0], folder / "step_response.png")]
        for amp in GRID_AMPLITUDES:
            made.append(plot_tracking(records, amp, folder / f"tracking_p2p{amp:g}.png"))
        report = json.loads((out / "evaluate" / "sensor_error.json").read_text())
        made.append(plot_sensor_error(report, folder / "sensor_error.png"))
        rows = json.loads((out / "control" / "grid.json").read_text())
        made.append(plot_nrmse_grid(rows, folder / "nrmse_grid.png"))
        made.append(plot_training(out / "model" / "train_loss.csv", folder / "training_loss.png"))
    return made
