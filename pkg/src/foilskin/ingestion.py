"""Capacitance and marker logs: CSV I/O, stream alignment, dataset splits.

Log schemas (one header row, comma separated)::

    t,c12,c13,c23,c24,c34,c35,c45,c46,c56
    t,x1,y1,x2,y2,x3,y3,x4,y4,x5,y5

Times are written with six decimals, values with nine significant digits,
so a write/load cycle is a fixed point after the first pass.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import AlignmentError, DataError, ParseError
from .sensing import BaselineReference, normalize_values
from .streams import (CAPACITANCE_COLUMNS, MARKER_COLUMNS, N_MARKERS, CapacitanceStream,
                      MarkerSet, MarkerStream)

DEFAULT_TOLERANCE = 0.002
DEFAULT_RATIOS = (0.7, 0.2, 0.1)


class TrainingPair(NamedTuple):
    input: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class AlignedPairs:
    """Skin/marker pairs: ``inputs`` (N, 9) normalised, ``targets`` (N, 10) / scale."""

    times: np.ndarray
    inputs: np.ndarray
    targets: np.ndarray
    gaps: np.ndarray
    scale: float
    dropped: int
    tolerance: float

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> TrainingPair:
        return TrainingPair(self.inputs[i], self.targets[i])


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    scale: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.inputs)

    def part(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        idx = getattr(self, name)
        return self.inputs[idx], self.targets[idx]


# -- CSV ------------------------------------------------------------------------

def _format_rows(t: np.ndarray, values: np.ndarray) -> list[str]:
    return [f"{ti:.6f}," + ",".join(f"{v:.9g}" for v in row) for ti, row in zip(t, values)]


def _write(path, header, t, values):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)] + _format_rows(t, values)
    path.write_text("\n".join(lines) + "\n")


def write_capacitance_log(path, stream: CapacitanceStream) -> None:
    _write(path, CAPACITANCE_COLUMNS, stream.t, stream.values)


def write_marker_log(path, stream: MarkerStream) -> None:
    _write(path, MARKER_COLUMNS, stream.t, stream.points.reshape(len(stream), -1))


def _read(path, header) -> np.ndarray:
    path = Path(path)
    ncol = len(header)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise ParseError(path, 1, "empty file")
        if tuple(c.strip() for c in first) != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        prev = -math.inf
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise ParseError(path, line, f"expected {ncol} columns, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(path, line, str(exc)) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(path, line, "non-finite value")
            if vals[0] <= prev:
                raise ParseError(path, line, f"timestamp {vals[0]} does not increase")
            prev = vals[0]
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, ncol)


def load_capacitance_log(path) -> CapacitanceStream:
    data = _read(path, CAPACITANCE_COLUMNS)
    bad = np.argwhere(data[:, 1:] <= 0)
    if len(bad):
        raise ParseError(path, int(bad[0, 0]) + 2, "raw capacitance must be positive")
    return CapacitanceStream(data[:, 0].copy(), data[:, 1:].copy(), "raw")


def load_marker_log(path) -> MarkerStream:
    data = _read(path, MARKER_COLUMNS)
    points = data[:, 1:].reshape(-1, N_MARKERS, 2)
    unordered = np.argwhere(np.any(np.diff(points[:, :, 0], axis=1) <= 0, axis=1))
    if len(unordered):
        raise ParseError(path, int(unordered[0, 0]) + 2, "markers not ordered along the chord")
    return MarkerStream(data[:, 0].copy(), points.copy())


# -- alignment ------------------------------------------------------------------

def align_streams(cap: CapacitanceStream, markers: MarkerStream, ref: BaselineReference,
                  tol: float = DEFAULT_TOLERANCE, scale: float = 200.0) -> AlignedPairs:
    """Pair every marker set with its nearest capacitance frame within ``tol`` s.

    Inputs are normalised against ``ref``; marker coordinates are divided by
    ``scale`` (the chord length).  Marker sets without a frame close enough
    are dropped and counted.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if len(cap) == 0 or len(markers) == 0:
        raise AlignmentError("both streams must be non-empty")
    if cap.kind != "raw":
        raise ValueError("alignment expects raw capacitance")
    tc = np.asarray(cap.t)
    tm = np.asarray(markers.t)
    right = np.clip(np.searchsorted(tc, tm), 1, len(tc) - 1) if len(tc) > 1 else np.zeros(len(tm), int)
    left = np.maximum(right - 1, 0)
    # ties go to the earlier frame
    nearest = np.where(np.abs(tc[left] - tm) <= np.abs(tc[right] - tm), left, right)
    gaps = np.abs(tc[nearest] - tm)
    keep = gaps <= tol
    if not np.any(keep):
        raise AlignmentError(f"no marker set has a capacitance frame within {tol} s")
    inputs = normalize_values(cap.values[nearest[keep]], ref)
    targets = markers.points[keep].reshape(-1, 2 * N_MARKERS) / scale
    return AlignedPairs(tm[keep], inputs, targets, gaps[keep], float(scale),
                        int(np.count_nonzero(~keep)), float(tol))


def split_dataset(pairs: AlignedPairs, ratios=DEFAULT_RATIOS, seed: int = 0) -> Dataset:
    """Shuffled train/validation/test split; train and validation sizes are rounded."""
    n = len(pairs)
    if n < 10:
        raise DataError(f"need at least 10 pairs to split, got {n}")
    ratios = np.asarray(ratios, dtype=float)
    if ratios.shape != (3,) or np.any(ratios < 0) or not math.isclose(ratios.sum(), 1.0):
        raise ValueError("ratios must be three non-negative fractions summing to 1")
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    order = np.random.default_rng(seed).permutation(n)
    train = np.sort(order[:n_train])
    val = np.sort(order[n_train:n_train + n_val])
    test = np.sort(order[n_train + n_val:])
    meta = {"dropped": pairs.dropped, "tolerance": pairs.tolerance}
    return Dataset(pairs.inputs, pairs.targets, train, val, test, seed, pairs.scale, meta)


def write_manifest(path, dataset: Dataset, **extra) -> None:
    doc = {
        "counts": {"total": len(dataset), "train": len(dataset.train),
                   "val": len(dataset.val), "test": len(dataset.test)},
        "seed": dataset.seed,
        "scale": dataset.scale,
        **dataset.meta,
        **extra,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

