"""Electrode pairs, capacitance normalisation and a synthetic skin.

Normalisation divides each channel's change from the undeformed reference
by that reference: ``c = (c_raw - c_ref) / c_ref``.

The synthetic skin places six electrodes at fixed fractions along the tail.
Each pair reads ``gain / (d / d_rest + k * curvature * chord)``: ``d`` is the
arc length between the two electrodes on the deformed camber line and
``curvature`` is taken at the midpoint of the pair.  Relative Gaussian noise
is then applied.  At rest the reading equals the pair gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError
from .plant import PlantParams, shape_parameters
from .streams import (PAIRS, N_CHANNELS, CapacitanceFrame, CapacitanceStream)

__all__ = [
    "PAIRS", "ElectrodePair", "BaselineReference", "SkinModelParams", "canonical_pairs",
    "normalize_frame", "normalize_values", "compute_baseline", "synth_capacitance",
    "synth_values", "rest_frame",
]


@dataclass(frozen=True, order=True)
class ElectrodePair:
    a: int
    b: int

    def __post_init__(self):
        if (self.a, self.b) not in PAIRS:
            raise ValueError(f"({self.a}, {self.b}) is not one of the measured pairs")

    @property
    def label(self) -> str:
        return f"c{self.a}{self.b}"


@dataclass(frozen=True)
class BaselineReference:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (N_CHANNELS,):
            raise CalibrationError(f"reference needs {N_CHANNELS} channels, got {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise CalibrationError("reference readout must be strictly positive on every channel")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SkinModelParams:
    stations: tuple = (0.10, 0.26, 0.42, 0.58, 0.74, 0.90)  # fractions of the tail
    gains: tuple = (1.00, 0.52, 1.06, 0.49, 0.97, 0.55, 1.03, 0.47, 0.94)
    curvature_sensitivity: float = 0.6
    noise_std: float = 0.005
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.stations, dtype=float)
        if s.shape != (6,) or np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] > 1:
            raise ValueError("six strictly increasing electrode stations in [0, 1] required")
        if len(self.gains) != N_CHANNELS or min(self.gains) <= 0:
            raise ValueError("nine positive pair gains required")
        if self.noise_std < 0:
            raise ValueError("noise std must be non-negative")


def canonical_pairs() -> list[ElectrodePair]:
    return [ElectrodePair(a, b) for a, b in PAIRS]


def normalize_values(raw: np.ndarray, ref: BaselineReference) -> np.ndarray:
    return (np.asarray(raw, dtype=float) - ref.values) / ref.values


def normalize_frame(raw: CapacitanceFrame, ref: BaselineReference) -> CapacitanceFrame:
    if raw.kind != "raw":
        raise ValueError("frame is already normalized")
    return CapacitanceFrame(raw.t, normalize_values(raw.values, ref), "normalized")


def compute_baseline(frames) -> BaselineReference:
    """Per-channel mean of a window of raw frames (a stream or a sequence)."""
    if isinstance(frames, CapacitanceStream):
        if frames.kind != "raw":
            raise ValueError("baseline needs raw frames")
        values = frames.values
    else:
        frames = list(frames)
        if any(f.kind != "raw" for f in frames):
            raise ValueError("baseline needs raw frames")
        values = np.array([f.values for f in frames]).reshape(-1, N_CHANNELS)
    if len(values) == 0:
        raise CalibrationError("baseline window is empty")
    mean = values.mean(axis=0)
    if np.any(mean <= 0):
        bad = [f"c{a}{b}" for (a, b), m in zip(PAIRS, mean) if m <= 0]
        raise CalibrationError(f"non-positive baseline on {', '.join(bad)}")
    return BaselineReference(mean)


def _arc_length(f, slope_scale, length):
    # arc length from the clamp to tail fraction f of y = A f^2, x = x0 + f L
    a = slope_scale
    af = a * f
    safe = np.where(a > 0, a, 1.0)
    curved = 0.5 * length * (f * np.sqrt(1 + af * af) + np.arcsinh(af) / safe)
    return np.where(a > 0, curved, length * f)


def synth_values(camber, skin: SkinModelParams, plant: PlantParams, rng=None,
                 shape=None) -> np.ndarray:
    """Raw readings (..., 9) for an array of cambers; noise drawn from ``rng``."""
    amp, xt = shape_parameters(camber, plant) if shape is None else shape
    x0 = plant.silicone_start
    length = xt - x0
    rest_length = plant.chord - x0
    a_idx = np.array([a for a, _ in PAIRS]) - 1
    b_idx = np.array([b for _, b in PAIRS]) - 1
    s = np.asarray(skin.stations, dtype=float)
    fa, fb = s[a_idx], s[b_idx]
    slope_scale = (2 * amp / length)[..., None]
    arc = _arc_length(fb, slope_scale, length[..., None]) - _arc_length(fa, slope_scale, length[..., None])
    rest = (fb - fa) * rest_length
    fm = 0.5 * (fa + fb)
    dy = slope_scale * fm
    curvature = (2 * amp / length**2)[..., None] / (1 + dy * dy) ** 1.5
    raw = np.asarray(skin.gains) / (arc / rest + skin.curvature_sensitivity * curvature * plant.chord)
    if rng is not None and skin.noise_std > 0:
        raw = raw * (1 + skin.noise_std * rng.standard_normal(raw.shape))
    return raw


def synth_capacitance(state, skin: SkinModelParams, plant: PlantParams, t: float | None = None,
                      ) -> CapacitanceFrame:
    """Raw frame for a plant state.

    The noise stream is derived from ``(skin.seed, t in microseconds)`` so a
    given state, time and seed always produce the same frame.
    """
    t = state.t if t is None else t
    rng = np.random.default_rng([skin.seed, int(round(t * 1e6))])
    return CapacitanceFrame(t, synth_values(state.camber, skin, plant, rng), "raw")


def rest_frame(skin: SkinModelParams, plant: PlantParams, camber: float | None = None) -> BaselineReference:
    """Noise-free reading at ``camber`` (default: zero-pressure camber) as a reference."""
    c = plant.camber_min if camber is None else camber
    return BaselineReference(synth_values(c, skin, plant))
