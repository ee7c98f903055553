"""Evaluation quantities for estimation and closed-loop runs.

All functions take plain arrays; the record-level helpers at the bottom just
unpack an ``ExperimentRecord``.  Errors are reported as ``ValueError``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

# 1 %-wide buckets centred on whole percents, so the 2 % and 9 % envelope ends sit mid-bucket
DEFAULT_BUCKETS = tuple((c - 0.5, c + 0.5) for c in range(1, 11))
GRID_WAVEFORMS = ("sine", "triangle")
GRID_AMPLITUDES = (2.0, 5.0)
GRID_PERIODS = (20.0, 10.0, 5.0)
GRID_COLUMNS = ("waveform", "peak_to_peak", "period", "nrmse_truth", "nrmse_estimate", "runs")


def nrmse(reference, actual) -> float:
    """RMS difference divided by the mean of ``reference``."""
    ref = np.asarray(reference, dtype=float).ravel()
    act = np.asarray(actual, dtype=float).ravel()
    if ref.shape != act.shape or ref.size == 0:
        raise ValueError("series must be non-empty and of equal length")
    mean = ref.mean()
    if mean == 0:
        raise ValueError("reference has zero mean")
    return float(np.sqrt(np.mean((act - ref) ** 2)) / abs(mean))


@dataclass(frozen=True)
class PhaseAverage:
    phase: np.ndarray  # bin start, s
    mean: np.ndarray
    std: np.ndarray  # spread across cycles
    cycles: int

    @property
    def sem(self) -> np.ndarray:
        """Standard error of each bin mean."""
        return self.std / math.sqrt(self.cycles)


def phase_average(series, period: float, dt: float, bins: int | None = None) -> PhaseAverage:
    """Fold a uniformly sampled series into one mean cycle.

    Only complete cycles are used.  With the default ``bins`` every sample
    of a cycle gets its own bin.
    """
    y = np.asarray(series, dtype=float).ravel()
    if not (period > 0 and dt > 0):
        raise ValueError("period and dt must be positive")
    per_cycle = period / dt
    bins = int(round(per_cycle)) if bins is None else int(bins)
    if bins < 8 or per_cycle < 8:
        raise ValueError(f"need at least 8 bins per cycle, got {min(bins, per_cycle):g}")
    # slack absorbs the rounding of time stamps read back from text
    cycles = int(math.floor(len(y) * dt / period + 1e-6))
    if cycles < 2:
        raise ValueError(f"series spans {len(y) * dt:g} s, need at least two periods ({2 * period:g} s)")
    n = min(len(y), int(math.floor(cycles * per_cycle + 1e-6)))
    k = np.arange(n)
    idx = np.minimum((np.mod(k * dt, period) / period * bins + 1e-9).astype(int), bins - 1)
    count = np.bincount(idx, minlength=bins)
    if np.any(count == 0):
        raise ValueError("more bins than samples per cycle")
    mean = np.bincount(idx, y[:n], bins) / count
    var = np.bincount(idx, (y[:n] - mean[idx]) ** 2, bins) / count
    return PhaseAverage(np.arange(bins) * period / bins, mean, np.sqrt(var), cycles)


@dataclass(frozen=True)
class ErrorStats:
    """Error magnitudes in percent of foil length."""

    mean: float
    std: float
    max: float
    min: float
    count: int

    @classmethod
    def of(cls, errors) -> "ErrorStats":
        e = np.asarray(errors, dtype=float)
        return cls(float(e.mean()), float(e.std()), float(e.max()), float(e.min()), int(e.size))


@dataclass(frozen=True)
class SensorErrorReport:
    buckets: dict  # "lo-hi" -> ErrorStats for tip error; empty buckets absent
    overall: ErrorStats
    marker_buckets: dict  # same keys, mean error over all markers (only for full marker input)
    marker_overall: ErrorStats | None

    def rows(self):
        for key, s in self.buckets.items():
            m = self.marker_buckets.get(key)
            yield (key, s.count, s.mean, s.std, s.max, s.min, m.mean if m else float("nan"))

    def to_dict(self) -> dict:
        return {
            "tip": {k: asdict(v) for k, v in self.buckets.items()},
            "tip_overall": asdict(self.overall),
            "marker_mean": {k: asdict(v) for k, v in self.marker_buckets.items()},
            "marker_mean_overall": asdict(self.marker_overall) if self.marker_overall else None,
        }


def _bucket_label(lo, hi) -> str:
    return f"{lo:g}-{hi:g}"


def sensor_error_stats(estimates, truth, true_camber, foil_length: float = 200.0,
                       buckets=DEFAULT_BUCKETS) -> SensorErrorReport:
    """Position error as percent of foil length, bucketed by true camber.

    ``estimates``/``truth`` are tip positions (N, 2) or full marker sets
    (N, 5, 2); with marker sets the last marker is the tip and the mean over
    all markers is reported as well.  Buckets are half-open [lo, hi).
    """
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truth, dtype=float)
    cam = np.asarray(true_camber, dtype=float).ravel()
    if est.shape != tru.shape or est.shape[-1] != 2 or est.ndim not in (2, 3):
        raise ValueError(f"estimates {est.shape} and truth {tru.shape} must match as (N, 2) or (N, M, 2)")
    if len(est) != len(cam) or len(cam) == 0:
        raise ValueError("camber series must align with the position series")
    if not foil_length > 0:
        raise ValueError("foil length must be positive")
    dist = np.hypot(*np.moveaxis(est - tru, -1, 0)) * (100.0 / foil_length)
    tip = dist if dist.ndim == 1 else dist[:, -1]
    per_marker = None if dist.ndim == 1 else dist.mean(axis=1)
    tip_stats, marker_stats = {}, {}
    for lo, hi in buckets:
        sel = (cam >= lo) & (cam < hi)
        if not np.any(sel):
            continue
        key = _bucket_label(lo, hi)
        tip_stats[key] = ErrorStats.of(tip[sel])
        if per_marker is not None:
            marker_stats[key] = ErrorStats.of(per_marker[sel])
    return SensorErrorReport(tip_stats, ErrorStats.of(tip), marker_stats,
                             None if per_marker is None else ErrorStats.of(per_marker))


def _crossing(t, y, level, rising) -> float:
    hit = y >= level if rising else y <= level
    if not np.any(hit):
        return math.nan
    i = int(np.argmax(hit))
    if i == 0:
        return float(t[0])
    # linear interpolation between the bracketing samples
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) / (y1 - y0) * (t[i] - t[i - 1]))


def step_rise_times(t, series, steps, end: float | None = None) -> np.ndarray:
    """10-90 % rise time for each ``(time, from, to)`` step; NaN when incomplete.

    A step's window runs to the next step (or ``end``, default the last
    sample).  Levels are relative to the commanded from/to values.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(series, dtype=float)
    if t.shape != y.shape:
        raise ValueError("time and series lengths differ")
    end = t[-1] if end is None else end
    out = []
    for k, (ts, lo, hi) in enumerate(steps):
        stop = steps[k + 1][0] if k + 1 < len(steps) else end
        sel = (t >= ts - 1e-12) & (t <= stop + 1e-12)
        if hi == lo or np.count_nonzero(sel) < 2:
            out.append(math.nan)
            continue
        tw, yw = t[sel], y[sel]
        rising = hi > lo
        t10 = _crossing(tw, yw, lo + 0.1 * (hi - lo), rising)
        t90 = _crossing(tw, yw, lo + 0.9 * (hi - lo), rising)
        out.append(t90 - t10)
    return np.array(out)


def rise_time(t, series, steps, end: float | None = None) -> float:
    """Mean 10-90 % rise time over the completed steps."""
    times = step_rise_times(t, series, steps, end)
    done = times[np.isfinite(times)]
    if done.size == 0:
        raise ValueError("no completed step in the series")
    return float(done.mean())


def plateau_errors(t, setpoint, series, steps, window: float = 1.0) -> np.ndarray:
    """Mean set-point error over the last ``window`` s of every plateau.

    Plateaus are the stretches before the first step, between steps and
    after the last one.
    """
    t = np.asarray(t, dtype=float)
    sp = np.asarray(setpoint, dtype=float)
    y = np.asarray(series, dtype=float)
    edges = [s[0] for s in steps] + [t[-1] + (t[1] - t[0] if len(t) > 1 else 0.0)]
    out = []
    for stop in edges:
        sel = (t < stop - 1e-12) & (t >= stop - window - 1e-12)
        if np.any(sel):
            out.append(float(np.mean(sp[sel] - y[sel])))
    return np.array(out)


# -- record helpers ---------------------------------------------------------------

def tracking_nrmse(record, which: str = "truth") -> float:
    return nrmse(record.setpoint, getattr(record, which))


def grid_table(records) -> list[dict]:
    """Tracking grid rows (waveform x amplitude x period), averaged over seeds.

    Cells are ordered waveform, amplitude, then period from slow to fast;
    cells without records are left out.
    """
    cells: dict = {}
    for r in records:
        p = r.profile
        if p.kind == "step":
            continue
        cells.setdefault((p.kind, float(p.peak_to_peak), float(p.period)), []).append(r)
    rows = []
    order = [(w, a, T) for w in GRID_WAVEFORMS for a in GRID_AMPLITUDES for T in GRID_PERIODS]
    extra = sorted(k for k in cells if k not in order)
    for key in order + extra:
        if key not in cells:
            continue
        rs = cells[key]
        rows.append({
            "waveform": key[0], "peak_to_peak": key[1], "period": key[2],
            "nrmse_truth": float(np.mean([tracking_nrmse(r, "truth") for r in rs])),
            "nrmse_estimate": float(np.mean([tracking_nrmse(r, "estimate") for r in rs])),
            "runs": len(rs),
        })
    return rows


def write_grid(rows, csv_path, json_path=None) -> None:
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for r in rows:
            w.writerow([r["waveform"], f"{r['peak_to_peak']:g}", f"{r['period']:g}",
                        f"{r['nrmse_truth']:.6f}", f"{r['nrmse_estimate']:.6f}", r["runs"]])
    if json_path is not None:
        Path(json_path).write_text(json.dumps(rows, indent=2) + "\n")
