"""Event-driven integrator checks against closed-form ballistic flight."""

import math

import numpy as np
import pytest

from slipgait.integrator import (
    EventSpec,
    IntegratorConfig,
    NoEventError,
    NonFiniteError,
    OutOfSpanError,
    dense_eval,
    integrate_until_event,
)

G = 9.81


def _ballistic(t, y):
    return np.array([y[2], y[3], 0.0, -G])


APEX_EVENT = EventSpec(residual=lambda t, y: y[3], direction="falling", name="apex")


def test_ballistic_apex_matches_closed_form():
    # From (x, y, vx, vy) = (0, 1, 2, 3): apex at t = vy/g, height
    # y + vy^2/(2 g).
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    pr = integrate_until_event(_ballistic, y0, [APEX_EVENT])
    t_star = 3.0 / G
    y_star = 1.0 + 9.0 / (2.0 * G)
    assert abs(t_star - 0.305810) < 5e-7 and abs(y_star - 1.458716) < 5e-7
    assert abs(pr.t_event - t_star) < 1e-8
    assert abs(pr.state_event[1] - y_star) < 1e-8
    assert abs(pr.state_event[3]) < 1e-10  # event residual at the crossing


def test_event_residual_below_tolerance_for_many_starts(rng):
    for _ in range(50):
        y0 = np.array([0.0, rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0),
                       rng.uniform(0.5, 4.0)])
        pr = integrate_until_event(_ballistic, y0, [APEX_EVENT])
        assert abs(pr.state_event[3]) < 1e-10
        assert abs(pr.t_event - y0[3] / G) < 1e-8


def test_dense_output_matches_closed_form_inside_span():
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    pr = integrate_until_event(_ballistic, y0, [APEX_EVENT])
    for t in np.linspace(0.0, pr.t_event, 23):
        y = dense_eval(pr, t)
        assert abs(y[0] - 2.0 * t) < 1e-8
        assert abs(y[1] - (1.0 + 3.0 * t - 0.5 * G * t * t)) < 1e-8
    with pytest.raises(OutOfSpanError):
        dense_eval(pr, pr.t_event + 1.0)


def test_first_admissible_event_wins():
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    ground = EventSpec(residual=lambda t, y: y[1], direction="falling", name="ground")
    pr = integrate_until_event(_ballistic, y0, [ground, APEX_EVENT])
    assert pr.event_index == 1  # apex happens before landing


def test_event_direction_filter():
    # A rising-only trigger on vy never fires on a falling crossing.
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    rising = EventSpec(residual=lambda t, y: y[3], direction="rising")
    with pytest.raises(NoEventError):
        integrate_until_event(_ballistic, y0, [rising],
                              IntegratorConfig(max_phase_time=0.5))


def test_event_guard_skips_crossings():
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    guarded = EventSpec(residual=lambda t, y: y[3], direction="falling",
                        guard=lambda y: y[0] > 1e9)
    ground = EventSpec(residual=lambda t, y: y[1], direction="falling")
    pr = integrate_until_event(_ballistic, y0, [guarded, ground])
    assert pr.event_index == 1


def test_timeout_raises_no_event():
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    never = EventSpec(residual=lambda t, y: y[1] + 100.0, direction="falling")
    with pytest.raises(NoEventError):
        integrate_until_event(_ballistic, y0, [never],
                              IntegratorConfig(max_phase_time=0.2))


def test_non_finite_state_raises():
    def blow_up(t, y):
        return np.array([y[0] ** 2])

    with pytest.raises((NonFiniteError, NoEventError)):
        integrate_until_event(
            blow_up, np.array([5.0]),
            [EventSpec(residual=lambda t, y: y[0] + 1e9, direction="falling")],
            IntegratorConfig(max_phase_time=2.0))
    with pytest.raises(NonFiniteError):
        integrate_until_event(_ballistic, np.array([0.0, np.nan, 1.0, 1.0]),
                              [APEX_EVENT])


def test_event_time_is_deterministic_and_tolerance_stable():
    y0 = np.array([0.0, 1.0, 2.0, 3.0])
    a = integrate_until_event(_ballistic, y0, [APEX_EVENT])
    b = integrate_until_event(_ballistic, y0, [APEX_EVENT])
    assert a.t_event == b.t_event
    # Halving the tolerances moves the located event by less than the
    # looser tolerance and never reorders which event fires first.
    loose = IntegratorConfig(rel_tol=1e-6, abs_tol=1e-8)
    tight = IntegratorConfig(rel_tol=5e-7, abs_tol=5e-9)
    ground = EventSpec(residual=lambda t, y: y[1], direction="falling")
    for cfg in (loose, tight):
        pr = integrate_until_event(_ballistic, y0, [APEX_EVENT, ground], cfg)
        assert pr.event_index == 0
        assert abs(pr.t_event - 3.0 / G) < 1e-6
