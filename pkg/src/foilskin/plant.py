"""Simulated morphing foil: syringe actuator, pressure-to-camber map, shape.

Actuator
    The controller drives the motor of a linear actuator pushing a syringe,
    so the command sets the *rate* at which the normalised pressure ``p``
    changes.  The commanded rate ``gain * u`` is capped at ``slew_rate``
    (the actuator speed limit) and reached through a first-order lag ``tau``.
    ``p`` is confined to [0, 1].

Pressure to camber
    ``camber = c_min + (c_max - c_min) * ((1 + blend) * p - blend * p**2)``,
    a concave quadratic blend: the foil responds quickly at low pressure and
    stiffens towards full inflation.

Shape family
    Behind the clamp at ``x0`` the tail is the parabola
    ``y = A * ((x - x0) / (x_te - x0))**2``.  For a camber ``c`` the tip
    deflection is ``A = tip_per_percent * c`` and ``x_te`` is solved so the
    perpendicular-distance camber of the curve is exactly ``c``.  The
    trailing edge pulls inward as the tail bends, as an inextensible tail
    would.  ``x0`` is chosen so the straight tail ends at the chord length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import FoilGeometry, PlanarPoint
from .streams import MarkerSet, N_MARKERS

CAMBER_LIMIT = 10.0
DEFAULT_DT = 1.0 / 714.0


@dataclass(frozen=True)
class PlantParams:
    chord: float = 200.0
    camber_min: float = 2.0
    camber_max: float = 9.0
    tip_per_percent: float = 5.0  # mm of tip travel per camber percent
    marker_fractions: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    slew_rate: float = 0.11  # 1/s, pressure units
    velocity_gain: float = 1.0  # 1/s per unit command
    lag: float = 0.05  # s
    blend: float = 1.0
    dt: float = DEFAULT_DT

    def __post_init__(self):
        ratio = self.chord / (100.0 * self.tip_per_percent)
        if not 0.25 < ratio < 1.0:
            raise ValueError("tip_per_percent incompatible with the chord length")
        if not 0 <= self.camber_min < self.camber_max <= CAMBER_LIMIT:
            raise ValueError("camber range must satisfy 0 <= min < max <= 10")
        f = np.asarray(self.marker_fractions, dtype=float)
        if f.shape != (N_MARKERS,) or np.any(np.diff(f) <= 0) or f[0] <= 0 or f[-1] != 1.0:
            raise ValueError("marker fractions must increase within (0, 1] and end at 1")
        if not 0 <= self.blend <= 1:
            raise ValueError("blend must lie in [0, 1] to keep the map monotone")
        if self.lag <= 0 or self.slew_rate <= 0 or self.velocity_gain <= 0:
            raise ValueError("actuator constants must be positive")

    @property
    def distance_ratio(self) -> float:
        return self.chord / (100.0 * self.tip_per_percent)

    @property
    def silicone_start(self) -> float:
        return self.chord * (2.0 * np.sqrt(self.distance_ratio) - 1.0)

    @property
    def geometry(self) -> FoilGeometry:
        return FoilGeometry(chord_length=self.chord, leading_edge=PlanarPoint(0.0, 0.0),
                            silicone_start=PlanarPoint(self.silicone_start, 0.0))


@dataclass(frozen=True)
class ActuatorState:
    command: float = 0.0
    pressure: float = 0.0
    velocity: float = 0.0
    rate_limit: float = 0.11
    tau: float = 0.05
    gain: float = 1.0

    @classmethod
    def from_params(cls, params: PlantParams, pressure: float = 0.0) -> "ActuatorState":
        return cls(pressure=pressure, rate_limit=params.slew_rate, tau=params.lag,
                   gain=params.velocity_gain)


@dataclass(frozen=True)
class FoilState:
    t: float
    actuator: ActuatorState
    camber: float
    markers: MarkerSet = field(repr=False)
    tip_deflection: float


def actuator_update(p, v, u, dt, rate_limit, gain, tau):
    """Array form of one actuator tick; returns (pressure, velocity)."""
    target = np.clip(gain * np.clip(u, -1.0, 1.0), -rate_limit, rate_limit)
    v = target + (v - target) * np.exp(-dt / tau)
    p = p + v * dt
    v = np.where((p >= 1.0) & (v > 0) | (p <= 0.0) & (v < 0), 0.0, v)
    return np.clip(p, 0.0, 1.0), v


def actuator_step(state: ActuatorState, u: float, dt: float) -> ActuatorState:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    u = float(np.clip(u, -1.0, 1.0))
    p, v = actuator_update(state.pressure, state.velocity, u, dt,
                           state.rate_limit, state.gain, state.tau)
    return replace(state, command=u, pressure=float(p), velocity=float(v))


def pressure_to_camber(p, params: PlantParams):
    p = np.clip(p, 0.0, 1.0)
    b = params.blend
    c = params.camber_min + (params.camber_max - params.camber_min) * ((1 + b) * p - b * p * p)
    return float(c) if np.ndim(c) == 0 else c


def camber_to_pressure(camber, params: PlantParams):
    """Inverse of ``pressure_to_camber``, clipped to the reachable range."""
    q = (np.clip(camber, params.camber_min, params.camber_max) - params.camber_min) / (
        params.camber_max - params.camber_min)
    b = params.blend
    if b == 0:
        p = q
    else:
        p = ((1 + b) - np.sqrt((1 + b) ** 2 - 4 * b * q)) / (2 * b)
    return float(p) if np.ndim(p) == 0 else p


def shape_parameters(camber, params: PlantParams, guess=None):
    """Tip deflection ``A`` and trailing-edge abscissa for the given camber.

    Solves ``(x_te + x0)**2 = 4 r x_te sqrt(x_te**2 + A**2)`` by Newton's
    method from the rest position (or from ``guess``, a nearby trailing-edge
    abscissa); r is the distance-to-deflection ratio.
    """
    c = np.asarray(camber, dtype=float)
    if np.any(~np.isfinite(c)) or np.any(c < 0) or np.any(c > CAMBER_LIMIT):
        raise ValueError(f"camber outside [0, {CAMBER_LIMIT}] %")
    amp = params.tip_per_percent * c
    x0, r = params.silicone_start, params.distance_ratio
    if guess is None:
        xt = np.full_like(amp, params.chord)
    else:
        xt = np.array(np.broadcast_to(guess, amp.shape), dtype=float)
    # converged entries are frozen so each result is independent of its batch mates
    active = np.ones(amp.shape, dtype=bool)
    for _ in range(60):
        length = np.sqrt(xt * xt + amp * amp)
        g = (xt + x0) ** 2 - 4 * r * xt * length
        dg = 2 * (xt + x0) - 4 * r * (length + xt * xt / length)
        step = np.where(active, g / dg, 0.0)
        xt = xt - step
        active &= np.abs(step) >= 1e-13 * params.chord
        if not active.any():
            break
    return amp, xt


def marker_positions(camber, params: PlantParams, shape=None) -> np.ndarray:
    """Marker coordinates (..., 5, 2) in mm for an array of cambers.

    ``shape`` may carry an already solved ``shape_parameters`` result.
    """
    amp, xt = shape_parameters(camber, params) if shape is None else shape
    f = np.asarray(params.marker_fractions, dtype=float)
    x0 = params.silicone_start
    x = x0 + f * (xt[..., None] - x0)
    y = amp[..., None] * f * f
    return np.stack([x, y], axis=-1)


def foil_shape(camber: float, params: PlantParams, t: float = 0.0) -> tuple[MarkerSet, float]:
    amp, _ = shape_parameters(camber, params)
    return MarkerSet(t, marker_positions(camber, params)), float(amp)


def rest_state(params: PlantParams, camber: float | None = None, t: float = 0.0) -> FoilState:
    """Plant at equilibrium (zero command) holding ``camber``; defaults to p = 0."""
    p = 0.0 if camber is None else camber_to_pressure(camber, params)
    return _compose(t, ActuatorState.from_params(params, p), params)


def plant_step(state: FoilState, u: float, dt: float, params: PlantParams) -> FoilState:
    actuator = actuator_step(state.actuator, u, dt)
    return _compose(state.t + dt, actuator, params)


def _compose(t, actuator, params):
    camber = pressure_to_camber(actuator.pressure, params)
    markers, tip = foil_shape(camber, params, t)
    return FoilState(t=t, actuator=actuator, camber=camber, markers=markers, tip_deflection=tip)


def open_loop_rise_time(params: PlantParams, camber_from: float, camber_to: float,
                        command: float = 1.0, dt: float | None = None, horizon: float = 20.0) -> float:
    """10-90 % time of the camber band [from, to] under a constant full command.

    The plant starts at rest holding ``camber_from``; the command sign
    follows the direction of the band.
    """
    from .metrics import rise_time

    dt = params.dt if dt is None else dt
    n = int(round(horizon / dt))
    u = math.copysign(abs(command), camber_to - camber_from)
    p = np.empty(n)
    pk, vk = float(camber_to_pressure(camber_from, params)), 0.0
    for k in range(n):
        p[k] = pk
        pk, vk = actuator_update(pk, vk, u, dt, params.slew_rate, params.velocity_gain, params.lag)
    camber = pressure_to_camber(p, params)
    return rise_time(np.arange(n) * dt, camber, [(0.0, camber_from, camber_to)])
