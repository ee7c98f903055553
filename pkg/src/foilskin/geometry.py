"""Camber-line construction and camber measurement.

Camber is the largest perpendicular distance between the camber line and the
chord line (leading edge to trailing edge), as a percentage of the nominal
chord length.  The camber line is a not-a-knot cubic spline through six points:
the clamp where the silicone tail starts plus the five tracked markers.

The spline is fitted in the chord frame (abscissa along the chord), which
makes the measured camber invariant under rigid motions of the whole foil.
All array helpers accept leading batch dimensions so the closed-loop
simulator can measure many foils per tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GeometryError

CONTROL_POINTS = 6
CAMBER_SAMPLES = 512
DEFAULT_CHORD = 200.0


class PlanarPoint(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class FoilGeometry:
    """Fixed geometry of the foil in the lab frame (mm, rad)."""

    chord_length: float = DEFAULT_CHORD
    leading_edge: PlanarPoint = PlanarPoint(0.0, 0.0)
    # kept for completeness; the foil is never pitched
    angle_of_attack: float = 0.0
    silicone_start: PlanarPoint = PlanarPoint(53.0, 0.0)

    def __post_init__(self):
        if not np.isfinite(self.chord_length) or self.chord_length <= 0:
            raise GeometryError(f"chord length must be positive, got {self.chord_length}")


@dataclass(frozen=True)
class ChordLine:
    point: np.ndarray
    direction: np.ndarray
    length: float

    @property
    def normal(self) -> np.ndarray:
        return np.array([-self.direction[1], self.direction[0]])


@dataclass(frozen=True)
class CamberLine:
    """Cubic spline v(u) in a frame with origin ``origin`` and
    abscissa along ``axis``; ``knots`` holds the (u, v) control points."""

    control_points: np.ndarray
    origin: np.ndarray
    axis: np.ndarray
    knots: np.ndarray
    second_derivatives: np.ndarray = field(repr=False)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.knots[0, 0]), float(self.knots[-1, 0])

    def local(self, u) -> np.ndarray:
        """Ordinate of the spline at abscissae ``u`` (frame coordinates)."""
        u = np.asarray(u, dtype=float)
        return spline_eval(self.knots[:, 0], self.knots[:, 1], self.second_derivatives, u)

    def points(self, u) -> np.ndarray:
        """Lab-frame points of the spline at abscissae ``u``; shape (..., 2)."""
        u = np.asarray(u, dtype=float)
        v = self.local(u)
        normal = np.array([-self.axis[1], self.axis[0]])
        return self.origin + u[..., None] * self.axis + v[..., None] * normal

    def sample(self, n: int = CAMBER_SAMPLES) -> np.ndarray:
        u0, u1 = self.span
        return self.points(np.linspace(u0, u1, n))


# -- spline kernel ------------------------------------------------------------

def spline_second_derivatives(x: np.ndarray, y: np.ndarray, bc: str = "not-a-knot") -> np.ndarray:
    """Second derivatives at the knots of an interpolating cubic spline.

    ``x`` and ``y`` have shape (..., n) with strictly increasing x.  ``bc`` is
    ``"not-a-knot"`` (needs n >= 4; reproduces any cubic exactly) or
    ``"natural"`` (zero curvature at both ends).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape, y.shape)
    n = shape[-1]
    if n < 3 or (bc == "not-a-knot" and n < 4):
        return np.zeros(shape)
    h = np.diff(x, axis=-1)
    slope = np.diff(y, axis=-1) / h
    a = np.zeros(shape[:-1] + (n, n))
    rhs = np.zeros(shape)
    i = np.arange(1, n - 1)
    a[..., i, i - 1] = h[..., :-1]
    a[..., i, i] = 2.0 * (h[..., :-1] + h[..., 1:])
    a[..., i, i + 1] = h[..., 1:]
    rhs[..., 1:-1] = 6.0 * np.diff(slope, axis=-1)
    if bc == "natural":
        a[..., 0, 0] = 1.0
        a[..., -1, -1] = 1.0
    elif bc == "not-a-knot":
        # third derivative continuous across the second and penultimate knots
        a[..., 0, 0] = -h[..., 1]
        a[..., 0, 1] = h[..., 0] + h[..., 1]
        a[..., 0, 2] = -h[..., 0]
        a[..., -1, -3] = -h[..., -1]
        a[..., -1, -2] = h[..., -1] + h[..., -2]
        a[..., -1, -1] = -h[..., -2]
    else:
        raise ValueError(f"unknown end condition {bc!r}")
    return np.linalg.solve(a, rhs[..., None])[..., 0]


def spline_coefficients(x: np.ndarray, y: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Per-interval Taylor coefficients at the left knot, shape (..., n-1, 5).

    Columns: knot abscissa, value, slope, half curvature, sixth of the jerk.
    """
    h = np.diff(x, axis=-1)
    y0, y1 = y[..., :-1], y[..., 1:]
    m0, m1 = m[..., :-1], m[..., 1:]
    slope = (y1 - y0) / h - h * (2 * m0 + m1) / 6.0
    parts = np.broadcast_arrays(x[..., :-1], y0, slope, 0.5 * m0, (m1 - m0) / (6.0 * h))
    return np.stack(parts, axis=-1)


def spline_eval(x: np.ndarray, y: np.ndarray, m: np.ndarray, xq: np.ndarray) -> np.ndarray:
    """Evaluate the cubic spline with knots (x, y) and second derivatives m.

    One-dimensional knots accept queries of any shape.  Batched knots of
    shape (..., n) take queries (..., q) with the same batch dimensions.
    Queries outside the knot span use the end cubics.
    """
    x = np.asarray(x, dtype=float)
    xq = np.asarray(xq, dtype=float)
    coef = spline_coefficients(x, np.asarray(y, dtype=float), np.asarray(m, dtype=float))
    n = x.shape[-1]
    if x.ndim == 1:
        c = coef[np.clip(np.searchsorted(x, xq, side="right") - 1, 0, n - 2)]
    else:
        batch = xq.shape[:-1]
        coef = np.broadcast_to(coef, batch + coef.shape[-2:]).reshape(-1, n - 1, 5)
        xb = np.broadcast_to(x, batch + (n,)).reshape(-1, n)
        q = xq.reshape(len(xb), -1)
        # interval index without a batched searchsorted: count interior knots passed
        i = np.sum(q[:, :, None] >= xb[:, None, 1:-1], axis=-1)
        flat = i + (n - 1) * np.arange(len(xb))[:, None]
        c = coef.reshape(-1, 5)[flat].reshape(xq.shape + (5,))
    d = xq - c[..., 0]
    return c[..., 1] + d * (c[..., 2] + d * (c[..., 3] + d * c[..., 4]))


# -- operations -----------------------------------------------------------------

def chord_line(geometry: FoilGeometry, trailing_edge) -> ChordLine:
    le = np.asarray(geometry.leading_edge, dtype=float)
    d = np.asarray(trailing_edge, dtype=float) - le
    length = float(np.hypot(d[0], d[1]))
    if not length > 0:
        raise GeometryError("leading and trailing edge coincide")
    return ChordLine(point=le, direction=d / length, length=length)


def perpendicular_distance(p, chord: ChordLine) -> float:
    d = np.asarray(p, dtype=float) - chord.point
    return float(abs(chord.direction[0] * d[1] - chord.direction[1] * d[0]))


def fit_camber_spline(points, chord: ChordLine | None = None) -> CamberLine:
    """Fit the not-a-knot cubic camber spline through six ordered points.

    With ``chord`` given the abscissa is measured along the chord, otherwise
    along the lab x axis.  Raises GeometryError unless the abscissae are
    strictly increasing.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape != (CONTROL_POINTS, 2):
        raise GeometryError(f"expected {CONTROL_POINTS} planar points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("control points must be finite")
    if chord is None:
        origin, axis = np.zeros(2), np.array([1.0, 0.0])
    else:
        origin, axis = np.asarray(chord.point, float), np.asarray(chord.direction, float)
    knots = _to_frame(pts, origin, axis)
    if np.any(np.diff(knots[:, 0]) <= 0):
        raise GeometryError("control points are not strictly ordered along the chord")
    m = spline_second_derivatives(knots[:, 0], knots[:, 1])
    return CamberLine(pts.copy(), origin, axis, knots, m)


def measure_camber(camber_line: CamberLine, geometry: FoilGeometry, trailing_edge,
                   samples: int = CAMBER_SAMPLES) -> tuple[float, float, int]:
    """Return (camber %, chordwise station of the maximum, side).

    ``side`` is +1 when the maximum lies left of the leading-to-trailing edge
    direction, -1 when right and 0 for a straight line.
    """
    chord = chord_line(geometry, trailing_edge)
    u0, u1 = camber_line.span
    u = np.linspace(u0, u1, samples)
    pts = camber_line.points(u)
    rel = pts - chord.point
    signed = chord.direction[0] * rel[:, 1] - chord.direction[1] * rel[:, 0]
    k = int(np.argmax(np.abs(signed)))  # first index on ties = smaller abscissa
    dist = abs(signed[k])
    return 100.0 * dist / geometry.chord_length, float(u[k]), int(np.sign(signed[k]))


def camber_percent(camber_line: CamberLine, geometry: FoilGeometry, trailing_edge,
                   samples: int = CAMBER_SAMPLES) -> float:
    return measure_camber(camber_line, geometry, trailing_edge, samples)[0]


def markers_to_camber(markers, geometry: FoilGeometry, samples: int = CAMBER_SAMPLES) -> float:
    """Camber of a foil from its five marker positions (trailing edge last)."""
    pts = np.asarray(getattr(markers, "points", markers), dtype=float)
    if pts.shape != (CONTROL_POINTS - 1, 2):
        raise GeometryError(f"expected 5 markers, got shape {pts.shape}")
    chord = chord_line(geometry, pts[-1])
    control = np.vstack([np.asarray(geometry.silicone_start, float), pts])
    return camber_percent(fit_camber_spline(control, chord), geometry, pts[-1], samples)


def markers_to_camber_batch(markers: np.ndarray, geometry: FoilGeometry,
                            samples: int = CAMBER_SAMPLES) -> np.ndarray:
    """Vectorised ``markers_to_camber`` over marker arrays of shape (..., 5, 2).

    Foils whose control points are not ordered along the chord get NaN rather
    than an exception so one bad estimate cannot abort a batch.
    """
    markers = np.asarray(markers, dtype=float)
    batch = markers.shape[:-2]
    le = np.asarray(geometry.leading_edge, float)
    anchor = np.broadcast_to(np.asarray(geometry.silicone_start, float), batch + (1, 2))
    pts = np.concatenate([anchor, markers], axis=-2)
    d = markers[..., -1, :] - le
    length = np.hypot(d[..., 0], d[..., 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        axis = d / length[..., None]
    rel = pts - le
    u = rel[..., 0] * axis[..., None, 0] + rel[..., 1] * axis[..., None, 1]
    v = axis[..., None, 0] * rel[..., 1] - axis[..., None, 1] * rel[..., 0]
    ok = np.all(np.diff(u, axis=-1) > 0, axis=-1) & (length > 0)
    # keep the linear solve well posed for rejected foils
    u = np.where(ok[..., None], u, np.arange(CONTROL_POINTS, dtype=float))
    v = np.where(ok[..., None], v, 0.0)
    m = spline_second_derivatives(u, v)
    # evaluating only the candidate stations gives the same maximum as all of them
    k = _candidate_stations(u, spline_coefficients(u, v, m), samples)
    uq = u[..., :1] + (u[..., -1:] - u[..., :1]) * np.linspace(0.0, 1.0, samples)[k]
    vq = spline_eval(u, v, m, uq)
    camber = 100.0 * np.max(np.abs(vq), axis=-1) / geometry.chord_length
    return np.where(ok, camber, np.nan)


def _candidate_stations(u: np.ndarray, coef: np.ndarray, samples: int) -> np.ndarray:
    """Sample indices that can hold the sampled maximum of |v|.

    Between critical points |v| is monotone, so the largest sample sits at a
    span end or next to a stationary point of some interval's cubic.  Roots
    falling outside their interval only add harmless extra candidates.
    """
    a = 3.0 * coef[..., 4]
    b = 2.0 * coef[..., 3]
    c = coef[..., 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        q = -0.5 * (b + np.copysign(np.sqrt(b * b - 4 * a * c), b))
        roots = np.concatenate([q / a, c / q], axis=-1) + np.concatenate([coef[..., 0]] * 2, axis=-1)
        k = np.floor((roots - u[..., :1]) / (u[..., -1:] - u[..., :1]) * (samples - 1))
    k = np.where(np.isfinite(k), k, 0.0)
    k = np.clip(np.concatenate([k, k + 1], axis=-1), 0, samples - 1).astype(int)
    ends = np.broadcast_to(np.array([0, samples - 1]), k.shape[:-1] + (2,))
    return np.concatenate([ends, k], axis=-1)


def _to_frame(pts: np.ndarray, origin: np.ndarray, axis: np.ndarray) -> np.ndarray:
    rel = pts - origin
    u = rel[:, 0] * axis[0] + rel[:, 1] * axis[1]
    v = axis[0] * rel[:, 1] - axis[1] * rel[:, 0]
    return np.column_stack([u, v])
