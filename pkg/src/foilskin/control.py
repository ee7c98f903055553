"""PID camber regulation, set-point profiles and the closed-loop simulator.

The controller works on per-unit camber error (percent / 100) so the gains
keep their nominal values Kp=50, Ki=1, Kd=1.  The derivative acts on a
low-passed error (10 Hz) and the integrator is frozen while the output is
saturated in the direction of the error.

``run_closed_loop_batch`` advances several independent experiments in
lockstep with numpy arrays; every run owns its noise stream, so a run's
record does not depend on which other runs share the batch (up to
matrix-product rounding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .estimator import MlpModel, estimate_points
from .geometry import markers_to_camber_batch
from .plant import (PlantParams, actuator_update, camber_to_pressure, marker_positions, pressure_to_camber,
                    shape_parameters)
from .sensing import BaselineReference, SkinModelParams, normalize_values, rest_frame, synth_values
from .streams import N_CHANNELS

ProfileKind = Literal["step", "sine", "triangle"]


@dataclass(frozen=True)
class PidGains:
    kp: float = 50.0
    ki: float = 1.0
    kd: float = 1.0

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise ValueError("gains must be finite")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    filtered_error: float | None = None
    cutoff: float = 10.0  # Hz, derivative filter
    output_limits: tuple = (-1.0, 1.0)
    integral_limit: float = 1.0  # per-unit error * s


@dataclass(frozen=True)
class SetpointProfile:
    kind: ProfileKind = "sine"
    mean: float = 4.25
    peak_to_peak: float = 5.0
    period: float = 10.0
    step_start: float = 2.5
    step_increment: float = 2.0
    step_dwell: float = 5.0
    step_end: float = 8.5

    def __post_init__(self):
        if self.kind not in ("step", "sine", "triangle"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if not self.period > 0 or self.peak_to_peak < 0 or not self.step_dwell > 0:
            raise ValueError("period and dwell must be positive, peak-to-peak non-negative")

    @property
    def label(self) -> str:
        if self.kind == "step":
            return "step"
        return f"{self.kind}_p2p{self.peak_to_peak:g}_T{self.period:g}"

    @property
    def n_steps(self) -> int:
        return int(math.ceil((self.step_end - self.step_start) / self.step_increment - 1e-9))

    def step_times(self) -> list[tuple[float, float, float]]:
        """(time, from, to) for each increment of a step profile."""
        out = []
        for k in range(1, self.n_steps + 1):
            lo = setpoint_at(self, (k - 1) * self.step_dwell)
            hi = setpoint_at(self, k * self.step_dwell)
            out.append((k * self.step_dwell, float(lo), float(hi)))
        return out


def setpoint_at(profile: SetpointProfile, t):
    """Set point in camber percent at time(s) ``t``."""
    t = np.asarray(t, dtype=float)
    if profile.kind == "step":
        sp = np.minimum(profile.step_start + profile.step_increment * np.floor(t / profile.step_dwell + 1e-12),
                        profile.step_end)
    else:
        phase = np.mod(t / profile.period, 1.0)
        if profile.kind == "sine":
            wave = np.sin(2 * np.pi * phase)
        else:
            wave = np.where(phase < 0.25, 4 * phase, np.where(phase < 0.75, 2 - 4 * phase, 4 * phase - 4))
        sp = profile.mean + 0.5 * profile.peak_to_peak * wave
    return float(sp) if sp.ndim == 0 else sp


def pid_update(integral, ef, gains: PidGains, setpoint, measurement, dt, cutoff=10.0,
               limits=(-1.0, 1.0), integral_limit=1.0):
    """Array form of one PID tick; returns (command, integral, filtered error).

    ``ef`` holds NaN for controllers that have not run yet.
    """
    e = (np.asarray(setpoint, dtype=float) - measurement) / 100.0
    alpha = 1.0 - np.exp(-2 * np.pi * cutoff * dt)
    fresh = np.isnan(ef)
    prev = np.where(fresh, e, ef)
    ef_new = prev + alpha * (e - prev)
    deriv = (ef_new - prev) / dt
    candidate = np.clip(integral + e * dt, -integral_limit, integral_limit)
    raw = gains.kp * e + gains.ki * candidate + gains.kd * deriv
    lo, hi = limits
    # conditional integration: hold the integrator when pushing further into saturation
    wind = (raw > hi) & (e > 0) | (raw < lo) & (e < 0)
    integral = np.where(wind, integral, candidate)
    out = np.clip(gains.kp * e + gains.ki * integral + gains.kd * deriv, lo, hi)
    return out, integral, ef_new


def pid_step(state: PidState, gains: PidGains, setpoint: float, measurement: float,
             dt: float) -> tuple[float, PidState]:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    ef = np.nan if state.filtered_error is None else state.filtered_error
    u, integral, ef = pid_update(state.integral, ef, gains, setpoint, measurement, dt,
                                 state.cutoff, state.output_limits, state.integral_limit)
    return float(u), replace(state, integral=float(integral), filtered_error=float(ef))


# -- closed loop ----------------------------------------------------------------------

@dataclass
class ExperimentRecord:
    """Per-tick series of one closed-loop run (camber in percent)."""

    t: np.ndarray
    setpoint: np.ndarray
    estimate: np.ndarray
    truth: np.ndarray
    command: np.ndarray
    dt: float
    profile: SetpointProfile
    seed: int = 0
    feedback: str = "estimator"
    est_tip: np.ndarray = field(default=None, repr=False)
    true_tip: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.t)
        if any(len(a) != n for a in (self.setpoint, self.estimate, self.truth, self.command)):
            raise ValueError("record series must have equal length")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class LoopRun:
    profile: SetpointProfile
    duration: float
    seed: int = 0
    feedback: Literal["estimator", "truth"] = "estimator"


def run_closed_loop(profile: SetpointProfile, plant: PlantParams, skin: SkinModelParams,
                    model: MlpModel | None, duration: float, dt: float | None = None,
                    seed: int = 0, feedback: str = "estimator", gains: PidGains = PidGains(),
                    baseline: BaselineReference | None = None) -> ExperimentRecord:
    run = LoopRun(profile, duration, seed, feedback)
    return run_closed_loop_batch([run], plant, skin, model, dt, gains, baseline)[0]


def run_closed_loop_batch(runs, plant: PlantParams, skin: SkinModelParams, model: MlpModel | None,
                          dt: float | None = None, gains: PidGains = PidGains(),
                          baseline: BaselineReference | None = None,
                          cutoff: float = 10.0) -> list[ExperimentRecord]:
    """Simulate the sensing/estimation/PID/plant loop for several runs at once.

    Each tick: true shape -> synthetic skin frame -> normalise -> MLP marker
    estimate -> camber -> PID -> actuator.  With ``feedback="truth"`` the
    controller sees the true camber instead of the estimate.  Every plant
    starts at rest holding its profile's initial set point.
    """
    runs = list(runs)
    if not runs:
        return []
    dt = plant.dt if dt is None else dt
    if not dt > 0:
        raise ValueError("dt must be positive")
    steps = np.array([int(round(r.duration / dt)) for r in runs])
    if len(set(steps.tolist())) > 1:
        # runs of equal length share a batch so short runs stop early
        records = [None] * len(runs)
        for n_ticks in sorted(set(steps.tolist())):
            idx = np.flatnonzero(steps == n_ticks)
            group = run_closed_loop_batch([runs[i] for i in idx], plant, skin, model, dt, gains,
                                          baseline, cutoff)
            for i, rec in zip(idx, group):
                records[i] = rec
        return records
    needs_model = any(r.feedback == "estimator" for r in runs)
    if needs_model:
        if model is None:
            raise ValueError("estimator feedback needs a model")
        if model.sizes[0] != N_CHANNELS or model.sizes[-1] != 10:
            raise ValueError(f"model shape {model.sizes} does not match the 9-channel skin")
    ref = baseline if baseline is not None else rest_frame(skin, plant)
    geometry = plant.geometry
    b = len(runs)
    n = int(steps[0])
    rngs = [np.random.default_rng(r.seed) for r in runs]
    use_truth = np.array([r.feedback == "truth" for r in runs])

    t = np.arange(n) * dt
    sp = np.stack([np.broadcast_to(setpoint_at(r.profile, t), (n,)) for r in runs])
    p = np.asarray(camber_to_pressure(sp[:, 0], plant), dtype=float).reshape(b)
    v = np.zeros(b)
    integral = np.zeros(b)
    ef = np.full(b, np.nan)
    out = {k: np.empty((b, n)) for k in ("estimate", "truth", "command")}
    tips = {k: np.empty((b, n, 2)) for k in ("est", "true")}
    noise = np.empty((b, N_CHANNELS))
    for k in range(n):
        camber = pressure_to_camber(p, plant)
        shape = shape_parameters(camber, plant, guess=None if k == 0 else shape[1])
        true_pts = marker_positions(camber, plant, shape)
        for i, rng in enumerate(rngs):
            noise[i] = rng.standard_normal(N_CHANNELS)
        raw = synth_values(camber, skin, plant, shape=shape) * (1 + skin.noise_std * noise)
        if needs_model:
            est_pts = estimate_points(model, normalize_values(raw, ref))
            est = markers_to_camber_batch(est_pts, geometry)
            # an unusable estimate reads as the last measurement
            if np.any(np.isnan(est)):
                last = out["estimate"][:, k - 1] if k else sp[:, 0]
                est = np.where(np.isnan(est), last, est)
        else:
            est_pts = true_pts
            est = camber
        measured = np.where(use_truth, camber, est)
        u, integral, ef = pid_update(integral, ef, gains, sp[:, k], measured, dt, cutoff)
        out["estimate"][:, k] = est
        out["truth"][:, k] = camber
        out["command"][:, k] = u
        tips["est"][:, k] = est_pts[:, -1]
        tips["true"][:, k] = true_pts[:, -1]
        p, v = actuator_update(p, v, u, dt, plant.slew_rate, plant.velocity_gain, plant.lag)

    records = []
    for i, r in enumerate(runs):
        m = steps[i]
        records.append(ExperimentRecord(
            t[:m].copy(), sp[i, :m].copy(), out["estimate"][i, :m].copy(), out["truth"][i, :m].copy(),
            out["command"][i, :m].copy(), dt, r.profile, r.seed, r.feedback,
            tips["est"][i, :m].copy(), tips["true"][i, :m].copy()))
    return records


RECORD_COLUMNS = ("t", "setpoint", "estimate", "truth", "command")


def write_record(path, record: ExperimentRecord) -> None:
    """Per-tick CSV; fixed formatting keeps reruns byte-identical."""
    cols = (record.setpoint, record.estimate, record.truth, record.command)
    lines = [",".join(RECORD_COLUMNS)]
    lines += [f"{t:.6f}," + ",".join(f"{c[i]:.9g}" for c in cols) for i, t in enumerate(record.t)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_record(path, profile: SetpointProfile, seed: int = 0, feedback: str = "estimator") -> ExperimentRecord:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(RECORD_COLUMNS):
        raise ValueError(f"{path}: expected {len(RECORD_COLUMNS)} columns")
    t = data[:, 0]
    dt = float((t[-1] - t[0]) / (len(t) - 1)) if len(t) > 1 else 1.0
    return ExperimentRecord(t, data[:, 1], data[:, 2], data[:, 3], data[:, 4], dt, profile, seed, feedback)
