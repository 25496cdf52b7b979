"""Point-mass model with massless linear-spring legs.

Three continuous regimes ("charts"): flight (ballistic), single stance
(polar coordinates about the stance foot) and double stance (polar
coordinates about the front foot, rear foot at horizontal distance
``x_sep`` behind it).  All forces are conservative, so the mechanical
energy is an invariant of every chart and of every chart switch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "Chart",
    "ModelParams",
    "FlightState",
    "StanceState",
    "DoubleState",
    "flight_deriv",
    "stance_deriv",
    "double_deriv",
    "back_leg_length",
    "mechanical_energy",
    "stance_to_cartesian",
    "cartesian_to_stance",
]


class Chart(IntEnum):
    """Continuous-dynamics regime of the hybrid system."""

    FLIGHT = 0
    STANCE = 1
    DOUBLE = 2


@dataclass(frozen=True)
class ModelParams:
    """Physical constants: mass, leg stiffness, rest length, gravity."""

    m: float = 80.0       # kg
    k: float = 15000.0    # N/m
    r0: float = 1.0       # m
    g: float = 9.81       # m/s^2

    def __post_init__(self) -> None:
        for name in ("m", "k", "r0", "g"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"ModelParams.{name} must be strictly positive, got {v!r}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mass_kg": self.m,
                "stiffness_N_per_m": self.k,
                "rest_length_m": self.r0,
                "gravity_m_per_s2": self.g,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        obj = json.loads(text)
        try:
            return cls(
                m=float(obj["mass_kg"]),
                k=float(obj["stiffness_N_per_m"]),
                r0=float(obj["rest_length_m"]),
                g=float(obj["gravity_m_per_s2"]),
            )
        except KeyError as exc:
            raise ValueError(f"missing model parameter key: {exc}") from exc


@dataclass(frozen=True)
class FlightState:
    """Ballistic chart state: Cartesian position and velocity of the mass."""

    x: float
    y: float
    vx: float
    vy: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)

    @classmethod
    def from_array(cls, a) -> "FlightState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class StanceState:
    """Single-stance state in polar coordinates about the stance foot.

    ``theta`` is measured from the horizontal, growing clockwise, so the
    mass sits at ``(-r cos(theta), r sin(theta))`` relative to the foot.
    """

    r: float
    theta: float
    rdot: float
    thetadot: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rdot, self.thetadot], dtype=float)

    @classmethod
    def from_array(cls, a) -> "StanceState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class DoubleState:
    """Double-stance state: front-leg polar coordinates plus foot separation.

    The origin is the front foot; the rear foot sits at ``(-x_sep, 0)``.
    ``x_sep`` is constant during a double-stance phase.
    """

    r: float
    theta: float
    rdot: float
    thetadot: float
    x_sep: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.rdot, self.thetadot], dtype=float)

    @classmethod
    def from_array(cls, a, x_sep: float) -> "DoubleState":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]), float(x_sep))


def flight_deriv(s: FlightState, p: ModelParams) -> np.ndarray:
    """Time derivative of the flight state: free fall under gravity."""
    return np.array([s.vx, s.vy, 0.0, -p.g])


def stance_deriv(s: StanceState, p: ModelParams) -> np.ndarray:
    """Time derivative of the single-stance state."""
    if s.r <= 0.0:
        raise ValueError(f"stance leg length must be positive, got r={s.r}")
    r, th, rd, thd = s.r, s.theta, s.rdot, s.thetadot
    rdd = (p.k / p.m) * (p.r0 - r) + r * thd * thd - p.g * math.sin(th)
    thdd = -(2.0 * rd * thd + p.g * math.cos(th)) / r
    return np.array([rd, thd, rdd, thdd])


def back_leg_length(r: float, theta: float, x_sep: float) -> float:
    """Distance from the mass to the rear foot in double stance."""
    return math.sqrt(r * r + x_sep * x_sep - 2.0 * r * x_sep * math.cos(theta))


def double_deriv(s: DoubleState, p: ModelParams) -> np.ndarray:
    """Time derivative of the double-stance state (``x_sep`` is constant).

    The rear spring contributes through its length ``r_back``; its force
    factor ``1 - r0/r_back`` vanishes when the rear leg is at natural
    length, reducing the dynamics to the single-stance ones.
    """
    if s.r <= 0.0:
        raise ValueError(f"front leg length must be positive, got r={s.r}")
    r, th, rd, thd = s.r, s.theta, s.rdot, s.thetadot
    rb = back_leg_length(r, th, s.x_sep)
    if rb <= 0.0:
        raise ValueError("rear leg length is zero (mass at the rear foot)")
    km = p.k / p.m
    fb = 1.0 - p.r0 / rb
    rdd = km * ((p.r0 - r) + fb * (s.x_sep * math.cos(th) - r)) + r * thd * thd - p.g * math.sin(th)
    thdd = -(km * fb * s.x_sep * math.sin(th) + 2.0 * rd * thd + p.g * math.cos(th)) / r
    return np.array([rd, thd, rdd, thdd])


def mechanical_energy(chart: Chart, state, p: ModelParams) -> float:
    """Total mechanical energy (J); gravity potential referenced to y = 0."""
    if chart == Chart.FLIGHT:
        s: FlightState = state
        return 0.5 * p.m * (s.vx * s.vx + s.vy * s.vy) + p.m * p.g * s.y
    if chart == Chart.STANCE:
        st: StanceState = state
        kin = 0.5 * p.m * (st.rdot * st.rdot + st.r * st.r * st.thetadot * st.thetadot)
        return 0.5 * p.k * (p.r0 - st.r) ** 2 + kin + p.m * p.g * st.r * math.sin(st.theta)
    if chart == Chart.DOUBLE:
        d: DoubleState = state
        kin = 0.5 * p.m * (d.rdot * d.rdot + d.r * d.r * d.thetadot * d.thetadot)
        rb = back_leg_length(d.r, d.theta, d.x_sep)
        return (
            0.5 * p.k * (p.r0 - d.r) ** 2
            + 0.5 * p.k * (p.r0 - rb) ** 2
            + kin
            + p.m * p.g * d.r * math.sin(d.theta)
        )
    raise ValueError(f"unknown chart {chart!r}")


def stance_to_cartesian(s: StanceState) -> FlightState:
    """Mass position and velocity relative to the stance foot.

    Velocities follow by differentiating the position map, which is valid
    across chart switches because the springs engage at natural length and
    the mass velocity is continuous.
    """
    cth, sth = math.cos(s.theta), math.sin(s.theta)
    x = -s.r * cth
    y = s.r * sth
    vx = -s.rdot * cth + s.r * s.thetadot * sth
    vy = s.rdot * sth + s.r * s.thetadot * cth
    return FlightState(x, y, vx, vy)


def cartesian_to_stance(f: FlightState, foot_x: float = 0.0) -> StanceState:
    """Inverse of :func:`stance_to_cartesian` for a foot at ``(foot_x, 0)``."""
    if f.y <= 0.0:
        raise ValueError(f"mass below ground, y={f.y}")
    dx = f.x - foot_x
    r = math.hypot(dx, f.y)
    theta = math.atan2(f.y, -dx)
    cth, sth = math.cos(theta), math.sin(theta)
    rdot = -cth * f.vx + sth * f.vy
    thetadot = (sth * f.vx + cth * f.vy) / r
    return StanceState(r, theta, rdot, thetadot)
