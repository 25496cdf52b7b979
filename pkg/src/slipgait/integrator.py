"""Adaptive Dormand-Prince 5(4) integration with event localization.

Steps are taken with the fifth-order formula and controlled by the
embedded fourth-order error estimate (the classical ode45 pair).  Each
accepted step carries a quartic dense-output interpolant; event zero
crossings are bracketed by accepted steps and refined by bisection on
the interpolant until the residual magnitude drops below
``event_value_tol``.

An event that is exactly on its zero surface at the start of the
integration is "disarmed" until its residual leaves zero, so starting on
a surface never fires an event at t = 0.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegratorConfig",
    "EventSpec",
    "PhaseResult",
    "NoEventError",
    "NonFiniteError",
    "OutOfSpanError",
    "integrate_until_event",
    "dense_eval",
]

# Dormand-Prince 5(4) tableau, error weights and the Shampine quartic
# dense-output matrix (optimal c6).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXP = -0.2  # -1 / (error_estimator_order + 1)


class NoEventError(RuntimeError):
    """No event fired within ``max_phase_time``."""

    def __init__(self, message: str, partial: Optional["PhaseResult"] = None):
        super().__init__(message)
        self.partial = partial


class NonFiniteError(RuntimeError):
    """The state stopped being finite during integration."""


class OutOfSpanError(ValueError):
    """Dense evaluation requested outside the integrated time span."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    max_step: float = math.inf
    event_value_tol: float = 1e-10
    max_phase_time: float = 5.0

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "max_step", "event_value_tol", "max_phase_time"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"IntegratorConfig.{name} must be positive")


@dataclass(frozen=True)
class EventSpec:
    """Zero-crossing trigger on a scalar residual of (t, state).

    ``direction`` restricts the admissible crossing: "falling" fires on
    positive-to-nonpositive, "rising" on negative-to-nonnegative, and
    "either" on any sign change.  ``guard`` is evaluated at the localized
    crossing; a crossing whose guard is false is skipped.
    """

    residual: Callable[[float, np.ndarray], float]
    direction: str = "either"
    guard: Optional[Callable[[np.ndarray], bool]] = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.direction not in ("rising", "falling", "either"):
            raise ValueError(f"bad event direction {self.direction!r}")


@dataclass
class _Segment:
    t0: float
    h: float
    y0: np.ndarray
    q: np.ndarray  # (n, 4) dense-output coefficients

    def eval(self, t: float) -> np.ndarray:
        x = (t - self.t0) / self.h
        p = np.array([x, x * x, x ** 3, x ** 4])
        return self.y0 + self.h * (self.q @ p)


@dataclass
class PhaseResult:
    """One integrated phase, terminated by the first admissible event."""

    event_index: int
    t_event: float
    state_event: np.ndarray
    ts: np.ndarray
    states: np.ndarray
    segments: list = field(default_factory=list, repr=False)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])


def dense_eval(pr: PhaseResult, t: float) -> np.ndarray:
    """Evaluate the continuous interpolant of a phase at time ``t``."""
    if not pr.segments:
        raise OutOfSpanError("phase has no integrated segments")
    t_lo = pr.segments[0].t0
    t_hi = pr.t_event
    if t < t_lo - 1e-12 or t > t_hi + 1e-12:
        raise OutOfSpanError(f"t={t} outside integrated span [{t_lo}, {t_hi}]")
    t = min(max(t, t_lo), t_hi)
    starts = [seg.t0 for seg in pr.segments]
    i = max(0, bisect_right(starts, t) - 1)
    return pr.segments[i].eval(t)


def _rms_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, rtol, atol, max_step, t_span):
    """Hairer-style starting step size (as in standard ode45 drivers)."""
    scale = atol + np.abs(y0) * rtol
    d0 = _rms_norm(y0 / scale)
    d1 = _rms_norm(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = _rms_norm((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_span, max_step)


def _rk_step(fun, t, y, f, h):
    k = np.empty((7, y.size))
    k[0] = f
    for s in range(1, 6):
        dy = h * (_A[s, :s] @ k[:s])
        k[s] = fun(t + _C[s] * h, y + dy)
    y_new = y + h * (_B @ k[:6])
    k[6] = fun(t + h, y_new)
    return y_new, k


def _localize(seg: _Segment, ev: EventSpec, t_lo: float, t_hi: float, g_lo: float, tol: float) -> float:
    """Bisect the dense interpolant for the crossing time in (t_lo, t_hi]."""
    sign_lo = 1.0 if g_lo > 0 else -1.0
    for _ in range(128):
        t_mid = 0.5 * (t_lo + t_hi)
        if t_mid == t_lo or t_mid == t_hi:
            break
        g_mid = ev.residual(t_mid, seg.eval(t_mid))
        if abs(g_mid) < tol:
            return t_mid
        if (g_mid > 0) == (sign_lo > 0):
            t_lo = t_mid
        else:
            t_hi = t_mid
    return t_hi


def integrate_until_event(
    deriv: Callable[[float, np.ndarray], np.ndarray],
    s0,
    events: Sequence[EventSpec],
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
) -> PhaseResult:
    """Integrate until the first admissible event zero crossing.

    Returns the phase up to the event; raises :class:`NoEventError` when
    ``max_phase_time`` elapses first and :class:`NonFiniteError` when the
    state blows up.
    """
    if not events:
        raise ValueError("at least one event is required")
    y = np.asarray(s0, dtype=float).copy()
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("initial state is not finite")

    t_bound = t0 + cfg.max_phase_time
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    t = t0
    f = deriv(t, y)
    h_abs = _initial_step(deriv, t, y, f, rtol, atol, cfg.max_step, cfg.max_phase_time)

    g_prev = [ev.residual(t, y) for ev in events]
    armed = [g != 0.0 for g in g_prev]

    ts = [t]
    states = [y.copy()]
    segments: list[_Segment] = []

    while t < t_bound:
        min_step = 10.0 * abs(np.nextafter(t, math.inf) - t)
        h_abs = min(max(h_abs, min_step), cfg.max_step)

        step_rejected = False
        while True:
            if h_abs < min_step:
                if step_rejected:
                    raise NonFiniteError("required step size fell below time resolution")
                h_abs = min_step
            t_new = min(t + h_abs, t_bound)
            h = t_new - t
            if h <= 0:
                raise NonFiniteError("step size underflow")
            y_new, k = _rk_step(deriv, t, y, f, h)
            if not np.all(np.isfinite(y_new)):
                raise NonFiniteError(f"state became non-finite near t={t_new}")
            scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
            err = _rms_norm(h * (_E @ k) / scale)
            if err < 1.0:
                factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** _ERR_EXP)
                if step_rejected:
                    factor = min(1.0, factor)
                h_abs = h_abs * factor
                break
            h_abs = h * max(_MIN_FACTOR, _SAFETY * err ** _ERR_EXP)
            step_rejected = True

        seg = _Segment(t, h, y.copy(), k.T @ _P)
        segments.append(seg)

        # Event scan over the accepted step.
        best_t = math.inf
        best_idx = -1
        for i, ev in enumerate(events):
            g_new = ev.residual(t_new, y_new)
            if not armed[i]:
                if g_new != 0.0:
                    armed[i] = True
                    g_prev[i] = g_new
                continue
            g_old = g_prev[i]
            falling = g_old > 0.0 and g_new <= 0.0
            rising = g_old < 0.0 and g_new >= 0.0
            crossed = (
                (ev.direction == "falling" and falling)
                or (ev.direction == "rising" and rising)
                or (ev.direction == "either" and (falling or rising))
            )
            if crossed:
                t_ev = _localize(seg, ev, t, t_new, g_old, cfg.event_value_tol)
                if ev.guard is None or ev.guard(seg.eval(t_ev)):
                    if t_ev < best_t:
                        best_t = t_ev
                        best_idx = i
            g_prev[i] = g_new

        if best_idx >= 0:
            y_ev = seg.eval(best_t)
            ts.append(best_t)
            states.append(y_ev)
            return PhaseResult(
                event_index=best_idx,
                t_event=best_t,
                state_event=y_ev,
                ts=np.array(ts),
                states=np.array(states),
                segments=segments,
            )

        t, y, f = t_new, y_new, k[6].copy()
        ts.append(t)
        states.append(y.copy())

    partial = PhaseResult(
        event_index=-1,
        t_event=t,
        state_event=y,
        ts=np.array(ts),
        states=np.array(states),
        segments=segments,
    )
    raise NoEventError(f"no event within max_phase_time={cfg.max_phase_time}", partial=partial)
