"""Training-data acquisition routine on the simulated foil.

Baseline at zero pressure, a number of slow full-range actuation cycles, and
a closing baseline.  The skin is sampled at 714 Hz and the camera at 30 Hz;
the two clocks are independent so camera frames fall between skin frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ingestion import DEFAULT_TOLERANCE, AlignedPairs, Dataset, align_streams, split_dataset
from .plant import PlantParams, actuator_update, marker_positions, pressure_to_camber
from .sensing import BaselineReference, SkinModelParams, compute_baseline, synth_values
from .streams import CapacitanceStream, MarkerStream


@dataclass(frozen=True)
class TrainingProtocol:
    baseline: float = 30.0  # s, before and after actuation
    cycles: int = 10
    cycle_period: float = 74.0  # s
    skin_rate: float = 714.0  # Hz
    camera_rate: float = 30.0  # Hz
    tracking_gain: float = 5.0  # command per unit pressure error

    def __post_init__(self):
        if self.cycles < 0 or self.baseline < 0 or self.cycle_period <= 0:
            raise ValueError("invalid protocol timing")

    @property
    def duration(self) -> float:
        return 2 * self.baseline + self.cycles * self.cycle_period


@dataclass(frozen=True)
class TrainingLogs:
    capacitance: CapacitanceStream
    markers: MarkerStream
    camber: np.ndarray  # true camber at the marker timestamps
    baseline_end: float


def pressure_target(t, protocol: TrainingProtocol):
    """Raised-cosine pressure sweep 0 -> 1 -> 0 once per cycle."""
    t = np.asarray(t, dtype=float)
    active = (t >= protocol.baseline) & (t < protocol.baseline + protocol.cycles * protocol.cycle_period)
    phase = 2 * np.pi * (t - protocol.baseline) / protocol.cycle_period
    return np.where(active, 0.5 * (1 - np.cos(phase)), 0.0)


def simulate_pressure(protocol: TrainingProtocol, plant: PlantParams) -> tuple[np.ndarray, np.ndarray]:
    dt = 1.0 / protocol.skin_rate
    n = int(math.floor(protocol.duration * protocol.skin_rate + 1e-9))
    t = np.arange(n) * dt
    target = pressure_target(t, protocol)
    p = np.empty(n)
    pk, vk = 0.0, 0.0
    k_track = protocol.tracking_gain
    for k in range(n):
        p[k] = pk
        # next target leads the actuator lag a little
        u = k_track * (target[min(k + 1, n - 1)] - pk)
        pk, vk = actuator_update(pk, vk, u, dt, plant.slew_rate, plant.velocity_gain, plant.lag)
        pk, vk = float(pk), float(vk)
    return t, p


def generate_training_logs(protocol: TrainingProtocol, plant: PlantParams, skin: SkinModelParams,
                           seed: int) -> TrainingLogs:
    t, p = simulate_pressure(protocol, plant)
    camber = pressure_to_camber(p, plant)
    rng = np.random.default_rng(seed)
    raw = synth_values(camber, skin, plant, rng)
    cam_n = int(math.floor(protocol.duration * protocol.camera_rate + 1e-9))
    t_cam = np.arange(cam_n) / protocol.camera_rate
    cam_camber = pressure_to_camber(np.interp(t_cam, t, p), plant)
    markers = marker_positions(cam_camber, plant)
    return TrainingLogs(CapacitanceStream(t, raw, "raw"), MarkerStream(t_cam, markers),
                        cam_camber, protocol.baseline)


def baseline_from_logs(cap: CapacitanceStream, baseline_end: float) -> BaselineReference:
    window = np.asarray(cap.t) < baseline_end
    if not np.any(window):
        window[:1] = True
    return compute_baseline(CapacitanceStream(cap.t[window], cap.values[window], "raw"))


def build_dataset(cap: CapacitanceStream, markers: MarkerStream, baseline_end: float,
                  plant: PlantParams, seed: int, tol: float = DEFAULT_TOLERANCE,
                  ) -> tuple[Dataset, BaselineReference, AlignedPairs]:
    ref = baseline_from_logs(cap, baseline_end)
    pairs = align_streams(cap, markers, ref, tol, scale=plant.chord)
    return split_dataset(pairs, seed=seed), ref, pairs
