"""Event functions, chart switches, and the section-to-section gait step.

A gait step starts on the section (single stance, leg vertical), runs
through either flight (running) or double stance (walking / grounded
running) and ends at the next leg-vertical crossing in single stance.
Which branch is taken is decided by the dynamics: the first of
{takeoff, front-leg touchdown} selects it.  Failures (falling, moving
backwards, forbidden transitions, phase timeouts) are data, not
exceptions.

``apply_step`` runs on the compiled kernel by default;
``method="reference"`` uses the generic event-driven integrator and the
chart functions from :mod:`slipgait.model` instead.  The two paths are
pinned against each other by the test suite.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import _kernel
from .integrator import EventSpec, IntegratorConfig, NoEventError, NonFiniteError, integrate_until_event
from .model import Chart, FlightState, ModelParams, StanceState, mechanical_energy
from .section import EnergyShell, SectionState, vx_from_energy

__all__ = [
    "GaitLabel",
    "FailureReason",
    "StepStatus",
    "StepResult",
    "event_takeoff",
    "event_touchdown",
    "event_double_touchdown",
    "event_back_takeoff",
    "switch_s_to_d",
    "apply_step",
    "gait_map",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]

HALF_PI = 0.5 * math.pi

_MARKER_NAMES = {
    0: "",
    1: "takeoff",
    2: "touchdown",
    3: "s->d",
    4: "d->s",
    5: "section",
    6: "fell",
    7: "backward",
    8: "forbidden",
    9: "start",
}

TRAJECTORY_COLUMNS = [
    "t_s",
    "chart",
    "x_m",
    "y_m",
    "vx_m_s",
    "vy_m_s",
    "front_foot_x_m",
    "back_foot_x_m",
    "event",
]

_CHART_NAMES = {0: "ff", 1: "s", 2: "d"}


class GaitLabel(str, Enum):
    """Realized gait of one step."""

    R = "R"    # running: passed through flight
    GR = "GR"  # grounded running: entered double stance with rdot > 0
    W = "W"    # walking: entered double stance with rdot < 0

    @property
    def code(self) -> int:
        return {"R": 0, "GR": 1, "W": 2}[self.value]

    @classmethod
    def from_code(cls, code: int) -> "GaitLabel":
        return (cls.R, cls.GR, cls.W)[code]


class FailureReason(str, Enum):
    FELL = "Fell"                      # mass reached the ground
    BACKWARD = "Backward"              # forward speed crossed zero
    FORBIDDEN = "ForbiddenTransition"  # e.g. front leg unloads in double stance
    NO_EVENT = "NoEvent"               # phase timeout / pathological orbit


class StepStatus(str, Enum):
    OK = "ok"
    FAILED = "failed"
    WRONG_GAIT = "wrong_gait"


_STATUS_TO_REASON = {
    _kernel.STATUS_FELL: FailureReason.FELL,
    _kernel.STATUS_BACKWARD: FailureReason.BACKWARD,
    _kernel.STATUS_FORBIDDEN: FailureReason.FORBIDDEN,
    _kernel.STATUS_NO_EVENT: FailureReason.NO_EVENT,
    _kernel.STATUS_NONFINITE: FailureReason.NO_EVENT,
}


@dataclass
class StepResult:
    """Outcome of one gait-map application."""

    status: StepStatus
    next: Optional[SectionState] = None
    realized: Optional[GaitLabel] = None
    reason: Optional[FailureReason] = None
    chart_at_failure: Optional[str] = None
    energy: Optional[float] = None       # energy of the integrated section state
    duration: Optional[float] = None     # s, section to section
    trajectory: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status is StepStatus.OK


# --- Event residuals -------------------------------------------------------

def event_takeoff(s: StanceState, r0: float) -> float:
    """Spring back at natural length; rising crossing releases the leg."""
    return s.r - r0


def event_touchdown(f: FlightState, alpha: float, r0: float) -> float:
    """Mass descends to the landing-leg height r0*sin(alpha); guard vy < 0."""
    return f.y - r0 * math.sin(alpha)


def event_double_touchdown(s: StanceState, alpha: float, r0: float) -> float:
    """Mass height reaches touchdown height while tilted forward (theta > pi/2)."""
    return s.r * math.sin(s.theta) - r0 * math.sin(alpha)


def event_back_takeoff(r: float, theta: float, x_sep: float, r0: float) -> float:
    """Rear leg extends back to natural length; rising crossing ends double stance."""
    from .model import back_leg_length

    return back_leg_length(r, theta, x_sep) - r0


def switch_s_to_d(s: StanceState, alpha: float, r0: float):
    """Single-to-double stance relabeling at front-leg touchdown.

    Returns (front-leg stance state about the new foot, x_sep).  The mass
    position and velocity are continuous; both springs are at natural
    length at the instant of the switch.
    """
    from .model import cartesian_to_stance, stance_to_cartesian

    x_sep = r0 * math.cos(alpha) - s.r * math.cos(s.theta)
    cart = stance_to_cartesian(s)
    front = cartesian_to_stance(FlightState(cart.x - x_sep, cart.y, cart.vx, cart.vy), 0.0)
    return front, x_sep


# --- Kernel-backed step ----------------------------------------------------

def _check_alpha(alpha: float) -> None:
    if not (math.radians(55.0) - 1e-12 <= alpha <= math.radians(90.0) + 1e-12):
        warnings.warn(
            f"angle of attack {math.degrees(alpha):.3f} deg is outside the"
            " calibrated 55-90 deg range",
            stacklevel=3,
        )


def apply_step(
    x: SectionState,
    alpha: float,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    record: bool = False,
    sample_dt: float = 1e-3,
    t0: float = 0.0,
    foot_x0: float = 0.0,
    method: str = "fast",
) -> StepResult:
    """One application of the gait map from a section state with angle ``alpha`` (rad)."""
    _check_alpha(alpha)
    if method == "reference":
        return _apply_step_reference(x, alpha, p, shell, cfg)
    traj = np.empty((int(3 * cfg.max_phase_time / sample_dt) + 64, 9)) if record else np.empty((0, 9))
    status, gait, r2, vy2, vx_sec, fail_chart, t_end, _foot, nrow = _kernel.apply_step_kernel(
        x.r, x.vy, alpha, p.m, p.k, p.r0, p.g, shell.energy,
        cfg.rel_tol, cfg.abs_tol, cfg.event_value_tol, cfg.max_phase_time,
        record, sample_dt, traj, t0, foot_x0,
    )
    trajectory = traj[:nrow].copy() if record else None
    if status == _kernel.STATUS_OUTSIDE:
        raise ValueError(f"section state {x} lies outside the energy shell")
    if status != _kernel.STATUS_OK:
        return StepResult(
            status=StepStatus.FAILED,
            realized=GaitLabel.from_code(gait) if gait >= 0 else None,
            reason=_STATUS_TO_REASON[status],
            chart_at_failure=_CHART_NAMES[fail_chart],
            duration=t_end - t0,
            trajectory=trajectory,
        )
    nxt = SectionState(r=float(r2), vy=float(vy2))
    energy = 0.5 * p.k * (p.r0 - r2) ** 2 + 0.5 * p.m * (vx_sec * vx_sec + vy2 * vy2) + p.m * p.g * r2
    return StepResult(
        status=StepStatus.OK,
        next=nxt,
        realized=GaitLabel.from_code(gait),
        energy=float(energy),
        duration=t_end - t0,
        trajectory=trajectory,
    )


def gait_map(
    x: SectionState,
    alpha: float,
    requested: GaitLabel,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig = IntegratorConfig(),
    **kwargs,
) -> StepResult:
    """Apply one step and demand that the realized gait matches ``requested``."""
    res = apply_step(x, alpha, p, shell, cfg, **kwargs)
    if res.ok and res.realized is not requested:
        return StepResult(
            status=StepStatus.WRONG_GAIT,
            next=res.next,
            realized=res.realized,
            energy=res.energy,
            duration=res.duration,
            trajectory=res.trajectory,
        )
    return res


# --- Reference step via the generic integrator -----------------------------

def _flight_rhs(p: ModelParams):
    def rhs(t, y):
        return np.array([y[2], y[3], 0.0, -p.g])

    return rhs


def _stance_rhs(p: ModelParams):
    km = p.k / p.m

    def rhs(t, y):
        r, th, rd, thd = y
        return np.array(
            [rd, thd, km * (p.r0 - r) + r * thd * thd - p.g * math.sin(th),
             -(2.0 * rd * thd + p.g * math.cos(th)) / r]
        )

    return rhs


def _double_rhs(p: ModelParams, x_sep: float):
    km = p.k / p.m

    def rhs(t, y):
        r, th, rd, thd = y
        cth, sth = math.cos(th), math.sin(th)
        rb = math.sqrt(r * r + x_sep * x_sep - 2.0 * r * x_sep * cth)
        fb = 1.0 - p.r0 / rb
        return np.array(
            [rd, thd,
             km * ((p.r0 - r) + fb * (x_sep * cth - r)) + r * thd * thd - p.g * sth,
             -(km * fb * x_sep * sth + 2.0 * rd * thd + p.g * cth) / r]
        )

    return rhs


def _stance_vx(y) -> float:
    return -y[2] * math.cos(y[1]) + y[0] * y[3] * math.sin(y[1])


def _polar_from_cartesian(vx: float, vy: float, r: float, theta: float):
    c, s = math.cos(theta), math.sin(theta)
    return -c * vx + s * vy, (s * vx + c * vy) / r


def _fail(reason: FailureReason, chart: str, gait, t: float) -> StepResult:
    return StepResult(
        status=StepStatus.FAILED,
        realized=gait,
        reason=reason,
        chart_at_failure=chart,
        duration=t,
    )


def _apply_step_reference(
    x: SectionState,
    alpha: float,
    p: ModelParams,
    shell: EnergyShell,
    cfg: IntegratorConfig,
) -> StepResult:
    """Readable step implementation on top of ``integrate_until_event``."""
    vx0 = vx_from_energy(x.r, x.vy, shell)
    y = np.array([x.r, HALF_PI, x.vy, vx0 / x.r])
    gait: Optional[GaitLabel] = None
    t = 0.0

    fell_stance = EventSpec(lambda t_, s: s[0] * math.sin(s[1]), "falling", name="fell")
    backward_stance = EventSpec(lambda t_, s: _stance_vx(s), "falling", name="backward")

    # A leg at exactly natural length and extending releases at once; for
    # r > r0 the spring keeps acting until a true rising r - r0 crossing.
    if abs(x.r - p.r0) <= 1e-12 and x.vy > 0.0:
        flight = np.array([0.0, x.r, vx0, x.vy])
        gait = GaitLabel.R
    else:
        events = [
            EventSpec(lambda t_, s: s[0] - p.r0, "rising", name="takeoff"),
            EventSpec(
                lambda t_, s: s[0] * math.sin(s[1]) - p.r0 * math.sin(alpha),
                "falling",
                guard=lambda s: s[1] > HALF_PI,
                name="s->d",
            ),
            fell_stance,
            backward_stance,
        ]
        try:
            ph = integrate_until_event(_stance_rhs(p), y, events, cfg, t0=t)
        except (NoEventError, NonFiniteError):
            return _fail(FailureReason.NO_EVENT, "s", gait, t)
        t, y = ph.t_event, ph.state_event
        if ph.event_index == 2:
            return _fail(FailureReason.FELL, "s", gait, t)
        if ph.event_index == 3:
            return _fail(FailureReason.BACKWARD, "s", gait, t)
        if ph.event_index == 0:
            gait = GaitLabel.R
            cth, sth = math.cos(y[1]), math.sin(y[1])
            flight = np.array(
                [-y[0] * cth, y[0] * sth,
                 -y[2] * cth + y[0] * y[3] * sth, y[2] * sth + y[0] * y[3] * cth]
            )
        else:
            gait = GaitLabel.W if y[2] < 0.0 else GaitLabel.GR
            front, x_sep = switch_s_to_d(StanceState.from_array(y), alpha, p.r0)
            events_d = [
                EventSpec(
                    lambda t_, s: event_back_takeoff(s[0], s[1], x_sep, p.r0),
                    "rising",
                    name="d->s",
                ),
                EventSpec(lambda t_, s: s[0] - p.r0, "rising", name="forbidden"),
                fell_stance,
                backward_stance,
            ]
            try:
                ph = integrate_until_event(_double_rhs(p, x_sep), front.as_array(), events_d, cfg, t0=t)
            except (NoEventError, NonFiniteError):
                return _fail(FailureReason.NO_EVENT, "d", gait, t)
            t, y = ph.t_event, ph.state_event
            if ph.event_index == 1:
                return _fail(FailureReason.FORBIDDEN, "d", gait, t)
            if ph.event_index == 2:
                return _fail(FailureReason.FELL, "d", gait, t)
            if ph.event_index == 3:
                return _fail(FailureReason.BACKWARD, "d", gait, t)
            return _finish_landing(y, alpha, p, t, gait, cfg)

    # Flight branch.
    if flight[2] < 0.0:
        return _fail(FailureReason.BACKWARD, "ff", gait, t)
    events_f = [
        EventSpec(
            lambda t_, s: s[1] - p.r0 * math.sin(alpha),
            "falling",
            guard=lambda s: s[3] < 0.0,
            name="touchdown",
        ),
        EventSpec(lambda t_, s: s[1], "falling", name="fell"),
        EventSpec(lambda t_, s: s[2], "falling", name="backward"),
    ]
    try:
        ph = integrate_until_event(_flight_rhs(p), flight, events_f, cfg, t0=t)
    except (NoEventError, NonFiniteError):
        return _fail(FailureReason.NO_EVENT, "ff", gait, t)
    t, y = ph.t_event, ph.state_event
    if ph.event_index == 1:
        return _fail(FailureReason.FELL, "ff", gait, t)
    if ph.event_index == 2:
        return _fail(FailureReason.BACKWARD, "ff", gait, t)
    rd, thd = _polar_from_cartesian(y[2], y[3], p.r0, alpha)
    return _finish_landing(np.array([p.r0, alpha, rd, thd]), alpha, p, t, gait, cfg)


def _finish_landing(
    y: np.ndarray,
    alpha: float,
    p: ModelParams,
    t: float,
    gait: GaitLabel,
    cfg: IntegratorConfig,
) -> StepResult:
    # Section crossings only count in single stance; a landing leg already
    # past vertical has missed the section and must fail downstream.
    if abs(y[1] - HALF_PI) <= 1e-9:
        return _section_result(y, p, t, gait)
    events = [
        EventSpec(lambda t_, s: s[1] - HALF_PI, "rising", name="section"),
        EventSpec(lambda t_, s: s[0] - p.r0, "rising", name="forbidden"),
        EventSpec(lambda t_, s: s[0] * math.sin(s[1]), "falling", name="fell"),
        EventSpec(lambda t_, s: _stance_vx(s), "falling", name="backward"),
    ]
    try:
        ph = integrate_until_event(_stance_rhs(p), y, events, cfg, t0=t)
    except (NoEventError, NonFiniteError):
        return _fail(FailureReason.NO_EVENT, "s", gait, t)
    t, y = ph.t_event, ph.state_event
    if ph.event_index == 1:
        return _fail(FailureReason.FORBIDDEN, "s", gait, t)
    if ph.event_index == 2:
        return _fail(FailureReason.FELL, "s", gait, t)
    if ph.event_index == 3:
        return _fail(FailureReason.BACKWARD, "s", gait, t)
    return _section_result(y, p, t, gait)


def _section_result(y: np.ndarray, p: ModelParams, t: float, gait: GaitLabel) -> StepResult:
    energy = mechanical_energy(Chart.STANCE, StanceState.from_array(y), p)
    return StepResult(
        status=StepStatus.OK,
        next=SectionState(r=float(y[0]), vy=float(y[2])),
        realized=gait,
        energy=float(energy),
        duration=t,
    )


# --- Trajectory export ------------------------------------------------------

def write_trajectory_csv(path, rows: np.ndarray) -> None:
    """Write kernel trajectory rows (n, 9) to the documented CSV format."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            back = "" if math.isnan(row[7]) else repr(float(row[7]))
            front = "" if math.isnan(row[6]) else repr(float(row[6]))
            w.writerow(
                [
                    repr(float(row[0])),
                    _CHART_NAMES[int(row[1])],
                    repr(float(row[2])),
                    repr(float(row[3])),
                    repr(float(row[4])),
                    repr(float(row[5])),
                    front,
                    back,
                    _MARKER_NAMES[int(row[8])],
                ]
            )
