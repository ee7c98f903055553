"""Timestamped record types shared by the skin, the plant and the loaders.

Single records are small frozen dataclasses.  Whole recordings are kept as
column arrays (``CapacitanceStream``, ``MarkerStream``) because a training
run holds hundreds of thousands of skin frames.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

PAIRS = ((1, 2), (1, 3), (2, 3), (2, 4), (3, 4), (3, 5), (4, 5), (4, 6), (5, 6))
N_CHANNELS = len(PAIRS)
N_MARKERS = 5
CAPACITANCE_COLUMNS = ("t",) + tuple(f"c{a}{b}" for a, b in PAIRS)
MARKER_COLUMNS = ("t",) + tuple(f"{axis}{i}" for i in range(1, N_MARKERS + 1) for axis in "xy")

Kind = Literal["raw", "normalized"]


@dataclass(frozen=True)
class CapacitanceFrame:
    t: float
    values: np.ndarray
    kind: Kind = "raw"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (N_CHANNELS,):
            raise ValueError(f"a frame holds {N_CHANNELS} channels, got shape {values.shape}")
        if self.kind not in ("raw", "normalized"):
            raise ValueError(f"unknown frame kind {self.kind!r}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class MarkerSet:
    """Five planar marker positions in mm, nose side first, trailing edge last."""

    t: float
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.shape != (N_MARKERS, 2):
            raise ValueError(f"a marker set holds {N_MARKERS} points, got shape {points.shape}")
        object.__setattr__(self, "points", points)

    @property
    def tip(self) -> np.ndarray:
        return self.points[-1]


@dataclass(frozen=True)
class CapacitanceStream:
    """Column form of a capacitance log: ``t`` (N,), ``values`` (N, 9)."""

    t: np.ndarray
    values: np.ndarray
    kind: Kind = "raw"

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> CapacitanceFrame:
        return CapacitanceFrame(float(self.t[i]), self.values[i], self.kind)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_frames(cls, frames) -> "CapacitanceStream":
        frames = list(frames)
        kinds = {f.kind for f in frames}
        if len(kinds) > 1:
            raise ValueError("cannot mix raw and normalized frames")
        t = np.array([f.t for f in frames], dtype=float)
        values = np.array([f.values for f in frames], dtype=float).reshape(len(frames), N_CHANNELS)
        return cls(t, values, kinds.pop() if kinds else "raw")


@dataclass(frozen=True)
class MarkerStream:
    """Column form of a marker log: ``t`` (N,), ``points`` (N, 5, 2)."""

    t: np.ndarray
    points: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> MarkerSet:
        return MarkerSet(float(self.t[i]), self.points[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_sets(cls, sets) -> "MarkerStream":
        sets = list(sets)
        t = np.array([s.t for s in sets], dtype=float)
        points = np.array([s.points for s in sets], dtype=float).reshape(len(sets), N_MARKERS, 2)
        return cls(t, points)
