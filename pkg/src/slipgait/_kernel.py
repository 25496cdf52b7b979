"""Compiled section-to-section step kernel used by the sweep engine.

This mirrors the reference step built on :mod:`slipgait.integrator`
(same Dormand-Prince 5(4) pair, same step-size control, same event
arming and bisection localization) but runs as a single nopython kernel
so that region sweeps over (vertex, angle) grids stay tractable.  The
agreement between the two paths is pinned by tests.

Phase kinds::

    0  initial stance  (from the section, leg vertical)
    1  flight
    2  double stance
    3  landing stance  (ends at the theta = pi/2 section crossing)

Status codes::

    0 ok   1 fell   2 backward   3 forbidden transition
    4 no event within the phase time budget   5 outside energy shell
    6 state became non-finite

Gait codes: 0 running, 1 grounded running, 2 walking, -1 undetermined.
Trajectory marker codes: 0 sample, 1 takeoff, 2 touchdown, 3 s->d,
4 d->s, 5 section crossing, 6 fell, 7 backward, 8 forbidden, 9 start.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco

# Dormand-Prince 5(4) coefficients (same as slipgait.integrator).
_A = np.array(
    [
        [0, 0, 0, 0, 0, 0],
        [1 / 5, 0, 0, 0, 0, 0],
        [3 / 40, 9 / 40, 0, 0, 0, 0],
        [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
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

HALF_PI = 0.5 * math.pi

STATUS_OK = 0
STATUS_FELL = 1
STATUS_BACKWARD = 2
STATUS_FORBIDDEN = 3
STATUS_NO_EVENT = 4
STATUS_OUTSIDE = 5
STATUS_NONFINITE = 6

GAIT_R = 0
GAIT_GR = 1
GAIT_W = 2


@njit(cache=True)
def _rhs(chart, y, xsep, m, k, r0, g, out):
    if chart == 0:  # flight: (x, y, vx, vy)
        out[0] = y[2]
        out[1] = y[3]
        out[2] = 0.0
        out[3] = -g
    elif chart == 1:  # single stance: (r, theta, rdot, thetadot)
        r = y[0]
        th = y[1]
        out[0] = y[2]
        out[1] = y[3]
        out[2] = (k / m) * (r0 - r) + r * y[3] * y[3] - g * math.sin(th)
        out[3] = -(2.0 * y[2] * y[3] + g * math.cos(th)) / r
    else:  # double stance, rear foot at (-xsep, 0)
        r = y[0]
        th = y[1]
        cth = math.cos(th)
        sth = math.sin(th)
        rb = math.sqrt(r * r + xsep * xsep - 2.0 * r * xsep * cth)
        km = k / m
        fb = 1.0 - r0 / rb
        out[0] = y[2]
        out[1] = y[3]
        out[2] = km * ((r0 - r) + fb * (xsep * cth - r)) + r * y[3] * y[3] - g * sth
        out[3] = -(km * fb * xsep * sth + 2.0 * y[2] * y[3] + g * cth) / r


@njit(cache=True)
def _stance_vx(y):
    return -y[2] * math.cos(y[1]) + y[0] * y[3] * math.sin(y[1])


@njit(cache=True)
def _residuals(kind, y, xsep, alpha, r0, out):
    """Event residuals for a phase kind; returns the event count."""
    if kind == 0:  # initial stance
        out[0] = y[0] - r0                                        # takeoff, rising
        out[1] = y[0] * math.sin(y[1]) - r0 * math.sin(alpha)     # s->d, falling
        out[2] = y[0] * math.sin(y[1])                            # fell, falling
        out[3] = _stance_vx(y)                                    # backward, falling
        return 4
    if kind == 1:  # flight
        out[0] = y[1] - r0 * math.sin(alpha)                      # touchdown, falling
        out[1] = y[1]                                             # fell, falling
        out[2] = y[2]                                             # backward, falling
        return 3
    if kind == 2:  # double stance
        rb = math.sqrt(y[0] * y[0] + xsep * xsep - 2.0 * y[0] * xsep * math.cos(y[1]))
        out[0] = rb - r0                                          # d->s, rising
        out[1] = y[0] - r0                                        # forbidden d->ff, rising
        out[2] = y[0] * math.sin(y[1])                            # fell, falling
        out[3] = _stance_vx(y)                                    # backward, falling
        return 4
    # landing stance
    out[0] = y[1] - HALF_PI                                       # section, rising
    out[1] = y[0] - r0                                            # early takeoff, rising
    out[2] = y[0] * math.sin(y[1])                                # fell, falling
    out[3] = _stance_vx(y)                                        # backward, falling
    return 4


@njit(cache=True)
def _event_rising(kind, idx):
    if kind == 1:
        return False  # all flight events are falling crossings
    return idx == 0 or ((kind == 2 or kind == 3) and idx == 1)


@njit(cache=True)
def _guard_ok(kind, idx, y):
    if kind == 0 and idx == 1:
        return y[1] > HALF_PI
    if kind == 1 and idx == 0:
        return y[3] < 0.0
    return True


@njit(cache=True)
def _dense_eval(y0, q, h, x, out):
    x2 = x * x
    for i in range(4):
        out[i] = y0[i] + h * (q[i, 0] * x + q[i, 1] * x2 + q[i, 2] * x2 * x + q[i, 3] * x2 * x2)


@njit(cache=True)
def _record(traj, nrow, t, chart, y, xsep, foot_x, back_x, marker):
    if nrow >= traj.shape[0]:
        return nrow
    if chart == 0:
        x = y[0]
        yy = y[1]
        vx = y[2]
        vy = y[3]
        ffoot = np.nan
        bfoot = np.nan
    else:
        cth = math.cos(y[1])
        sth = math.sin(y[1])
        x = foot_x - y[0] * cth
        yy = y[0] * sth
        vx = -y[2] * cth + y[0] * y[3] * sth
        vy = y[2] * sth + y[0] * y[3] * cth
        ffoot = foot_x
        bfoot = back_x if chart == 2 else np.nan
    traj[nrow, 0] = t
    traj[nrow, 1] = chart
    traj[nrow, 2] = x
    traj[nrow, 3] = yy
    traj[nrow, 4] = vx
    traj[nrow, 5] = vy
    traj[nrow, 6] = ffoot
    traj[nrow, 7] = bfoot
    traj[nrow, 8] = marker
    return nrow + 1


@njit(cache=True)
def _phase(kind, chart, y, xsep, m, k, r0, g, alpha,
           rtol, atol, evtol, tmax, t0,
           rec, rec_dt, traj, nrow, foot_x, back_x):
    """Integrate one phase until its first admissible event.

    Modifies ``y`` in place to the event state.  Returns
    (status, event_index, t_event, nrow).
    """
    g_buf = np.empty(4)
    g_loc = np.empty(4)
    g_prev = np.empty(4)
    n_ev = _residuals(kind, y, xsep, alpha, r0, g_prev)
    armed = np.empty(4, dtype=np.bool_)
    for i in range(n_ev):
        armed[i] = g_prev[i] != 0.0

    f = np.empty(4)
    _rhs(chart, y, xsep, m, k, r0, g, f)

    # Initial step size (Hairer heuristic, RMS norm).
    d0 = 0.0
    d1 = 0.0
    for i in range(4):
        sc = atol + abs(y[i]) * rtol
        d0 += (y[i] / sc) ** 2
        d1 += (f[i] / sc) ** 2
    d0 = math.sqrt(d0 / 4.0)
    d1 = math.sqrt(d1 / 4.0)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    ytmp = np.empty(4)
    ftmp = np.empty(4)
    for i in range(4):
        ytmp[i] = y[i] + h0 * f[i]
    _rhs(chart, ytmp, xsep, m, k, r0, g, ftmp)
    d2 = 0.0
    for i in range(4):
        sc = atol + abs(y[i]) * rtol
        d2 += ((ftmp[i] - f[i]) / sc) ** 2
    d2 = math.sqrt(d2 / 4.0) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    h_abs = min(100.0 * h0, min(h1, tmax))

    t = t0
    t_bound = t0 + tmax
    k_st = np.empty((7, 4))
    y_new = np.empty(4)
    q = np.empty((4, 4))
    y_ev = np.empty(4)
    next_sample = math.ceil(t / rec_dt) * rec_dt if rec else 0.0
    if rec and next_sample <= t:
        next_sample += rec_dt

    n_steps = 0
    while t < t_bound:
        n_steps += 1
        if n_steps > 200000:
            return STATUS_NO_EVENT, -1, t, nrow
        min_step = 10.0 * abs(np.nextafter(t, math.inf) - t)
        if h_abs < min_step:
            h_abs = min_step

        # Adaptive step with embedded error control.
        step_rejected = False
        h = 0.0
        while True:
            if h_abs < min_step and step_rejected:
                return STATUS_NONFINITE, -1, t, nrow
            t_new = t + h_abs
            if t_new > t_bound:
                t_new = t_bound
            h = t_new - t
            if h <= 0.0:
                return STATUS_NONFINITE, -1, t, nrow

            for i in range(4):
                k_st[0, i] = f[i]
            for s in range(1, 6):
                for i in range(4):
                    acc = 0.0
                    for j in range(s):
                        acc += _A[s, j] * k_st[j, i]
                    ytmp[i] = y[i] + h * acc
                _rhs(chart, ytmp, xsep, m, k, r0, g, k_st[s])
            for i in range(4):
                acc = 0.0
                for s in range(6):
                    acc += _B[s] * k_st[s, i]
                y_new[i] = y[i] + h * acc
            _rhs(chart, y_new, xsep, m, k, r0, g, k_st[6])

            finite = True
            for i in range(4):
                if not math.isfinite(y_new[i]):
                    finite = False
            if not finite:
                return STATUS_NONFINITE, -1, t, nrow

            err = 0.0
            for i in range(4):
                e = 0.0
                for s in range(7):
                    e += _E[s] * k_st[s, i]
                sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
                e = h * e / sc
                err += e * e
            err = math.sqrt(err / 4.0)
            if err < 1.0:
                if err == 0.0:
                    factor = 10.0
                else:
                    factor = min(10.0, 0.9 * err ** -0.2)
                if step_rejected:
                    factor = min(1.0, factor)
                h_abs = h_abs * factor
                break
            h_abs = h * max(0.2, 0.9 * err ** -0.2)
            step_rejected = True

        # Dense-output coefficients for this step.
        for i in range(4):
            for c in range(4):
                acc = 0.0
                for s in range(7):
                    acc += k_st[s, i] * _P[s, c]
                q[i, c] = acc

        # Event scan.
        best_t = math.inf
        best_idx = -1
        n_ev = _residuals(kind, y_new, xsep, alpha, r0, g_buf)
        for i in range(n_ev):
            g_new = g_buf[i]
            if not armed[i]:
                if g_new != 0.0:
                    armed[i] = True
                    g_prev[i] = g_new
                continue
            g_old = g_prev[i]
            falling = g_old > 0.0 and g_new <= 0.0
            rising = g_old < 0.0 and g_new >= 0.0
            crossed = rising if _event_rising(kind, i) else falling
            if crossed:
                # Bisection on the dense interpolant.
                t_lo = t
                t_hi = t_new
                sign_lo = g_old > 0.0
                t_ev = t_hi
                for _ in range(128):
                    t_mid = 0.5 * (t_lo + t_hi)
                    if t_mid == t_lo or t_mid == t_hi:
                        t_ev = t_hi
                        break
                    _dense_eval(y, q, h, (t_mid - t) / h, y_ev)
                    _residuals(kind, y_ev, xsep, alpha, r0, g_loc)
                    g_mid = g_loc[i]
                    if abs(g_mid) < evtol:
                        t_ev = t_mid
                        break
                    if (g_mid > 0.0) == sign_lo:
                        t_lo = t_mid
                    else:
                        t_hi = t_mid
                _dense_eval(y, q, h, (t_ev - t) / h, y_ev)
                if _guard_ok(kind, i, y_ev):
                    if t_ev < best_t:
                        best_t = t_ev
                        best_idx = i
            g_prev[i] = g_new

        if best_idx >= 0:
            if rec:
                while next_sample < best_t:
                    _dense_eval(y, q, h, (next_sample - t) / h, ytmp)
                    nrow = _record(traj, nrow, next_sample, chart, ytmp, xsep, foot_x, back_x, 0.0)
                    next_sample += rec_dt
            _dense_eval(y, q, h, (best_t - t) / h, y_ev)
            for i in range(4):
                y[i] = y_ev[i]
            return STATUS_OK, best_idx, best_t, nrow

        if rec:
            while next_sample <= t_new:
                _dense_eval(y, q, h, (next_sample - t) / h, ytmp)
                nrow = _record(traj, nrow, next_sample, chart, ytmp, xsep, foot_x, back_x, 0.0)
                next_sample += rec_dt

        t = t_new
        for i in range(4):
            y[i] = y_new[i]
            f[i] = k_st[6, i]

    return STATUS_NO_EVENT, -1, t, nrow


@njit(cache=True)
def apply_step_kernel(r, vy, alpha, m, k, r0, g, E,
                      rtol, atol, evtol, tmax,
                      rec, rec_dt, traj, t0_abs, foot_x0):
    """One section-to-section gait step.

    Returns (status, gait, r_next, vy_next, vx_section, fail_chart,
    t_end_abs, foot_x_end, nrow).
    """
    nrow = 0
    # Forward speed from the energy shell.
    pot = 0.5 * k * (r0 - r) * (r0 - r) + m * g * r
    vx2 = 2.0 * (E - pot) / m - vy * vy
    if vx2 < -1e-9 * max(2.0 * E / m, 1.0):
        return STATUS_OUTSIDE, -1, np.nan, np.nan, np.nan, 1, t0_abs, foot_x0, nrow
    vx = math.sqrt(max(vx2, 0.0))

    y = np.empty(4)
    y[0] = r
    y[1] = HALF_PI
    y[2] = vy
    y[3] = vx / r
    foot_x = foot_x0
    back_x = np.nan
    xsep = 0.0
    t = t0_abs
    gait = -1

    if rec:
        nrow = _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 9.0)

    # Initial stance; a leg extending right at natural length takes off
    # immediately (the rising r - r0 event starts at zero and stays armed
    # off).  For r > r0 the spring keeps acting until a true rising
    # crossing, which preserves the shell energy exactly.
    if abs(r - r0) <= 1e-12 and vy > 0.0:
        gait = GAIT_R
        yf = np.empty(4)
        yf[0] = foot_x
        yf[1] = r
        yf[2] = vx
        yf[3] = vy
        y = yf
        kind = 1
        if rec:
            nrow = _record(traj, nrow, t, 0, y, xsep, foot_x, back_x, 1.0)
    else:
        status, ev, t, nrow = _phase(0, 1, y, xsep, m, k, r0, g, alpha,
                                     rtol, atol, evtol, tmax, t,
                                     rec, rec_dt, traj, nrow, foot_x, back_x)
        if status != STATUS_OK:
            return status, gait, np.nan, np.nan, np.nan, 1, t, foot_x, nrow
        if ev == 0:
            # Takeoff into flight.
            gait = GAIT_R
            if rec:
                nrow = _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 1.0)
            cth = math.cos(y[1])
            sth = math.sin(y[1])
            yf = np.empty(4)
            yf[0] = foot_x - y[0] * cth
            yf[1] = y[0] * sth
            yf[2] = -y[2] * cth + y[0] * y[3] * sth
            yf[3] = y[2] * sth + y[0] * y[3] * cth
            y = yf
            kind = 1
        elif ev == 1:
            # Front-leg touchdown: double stance begins.
            gait = GAIT_W if y[2] < 0.0 else GAIT_GR
            if rec:
                nrow = _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 3.0)
            cth = math.cos(y[1])
            sth = math.sin(y[1])
            vx_c = -y[2] * cth + y[0] * y[3] * sth
            vy_c = y[2] * sth + y[0] * y[3] * cth
            xsep = r0 * math.cos(alpha) - y[0] * cth
            back_x = foot_x
            foot_x = foot_x + xsep
            ca = math.cos(alpha)
            sa = math.sin(alpha)
            y[0] = r0
            y[1] = alpha
            y[2] = -ca * vx_c + sa * vy_c
            y[3] = (sa * vx_c + ca * vy_c) / r0
            kind = 2
        elif ev == 2:
            return STATUS_FELL, gait, np.nan, np.nan, np.nan, 1, t, foot_x, _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 6.0) if rec else nrow
        else:
            return STATUS_BACKWARD, gait, np.nan, np.nan, np.nan, 1, t, foot_x, _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 7.0) if rec else nrow

    if kind == 1:
        # Flight until touchdown at leg angle alpha.
        if y[2] < 0.0:
            return STATUS_BACKWARD, gait, np.nan, np.nan, np.nan, 0, t, foot_x, nrow
        status, ev, t, nrow = _phase(1, 0, y, 0.0, m, k, r0, g, alpha,
                                     rtol, atol, evtol, tmax, t,
                                     rec, rec_dt, traj, nrow, foot_x, back_x)
        if status != STATUS_OK:
            return status, gait, np.nan, np.nan, np.nan, 0, t, foot_x, nrow
        if ev == 1:
            return STATUS_FELL, gait, np.nan, np.nan, np.nan, 0, t, foot_x, _record(traj, nrow, t, 0, y, 0.0, foot_x, back_x, 6.0) if rec else nrow
        if ev == 2:
            return STATUS_BACKWARD, gait, np.nan, np.nan, np.nan, 0, t, foot_x, _record(traj, nrow, t, 0, y, 0.0, foot_x, back_x, 7.0) if rec else nrow
        if rec:
            nrow = _record(traj, nrow, t, 0, y, 0.0, foot_x, back_x, 2.0)
        ca = math.cos(alpha)
        sa = math.sin(alpha)
        foot_x = y[0] + r0 * ca
        back_x = np.nan
        vx_c = y[2]
        vy_c = y[3]
        ys = np.empty(4)
        ys[0] = r0
        ys[1] = alpha
        ys[2] = -ca * vx_c + sa * vy_c
        ys[3] = (sa * vx_c + ca * vy_c) / r0
        y = ys
        xsep = 0.0
    else:
        # Double stance until the rear leg extends to natural length.
        status, ev, t, nrow = _phase(2, 2, y, xsep, m, k, r0, g, alpha,
                                     rtol, atol, evtol, tmax, t,
                                     rec, rec_dt, traj, nrow, foot_x, back_x)
        if status != STATUS_OK:
            return status, gait, np.nan, np.nan, np.nan, 2, t, foot_x, nrow
        if ev == 1:
            return STATUS_FORBIDDEN, gait, np.nan, np.nan, np.nan, 2, t, foot_x, _record(traj, nrow, t, 2, y, xsep, foot_x, back_x, 8.0) if rec else nrow
        if ev == 2:
            return STATUS_FELL, gait, np.nan, np.nan, np.nan, 2, t, foot_x, _record(traj, nrow, t, 2, y, xsep, foot_x, back_x, 6.0) if rec else nrow
        if ev == 3:
            return STATUS_BACKWARD, gait, np.nan, np.nan, np.nan, 2, t, foot_x, _record(traj, nrow, t, 2, y, xsep, foot_x, back_x, 7.0) if rec else nrow
        # Rear takeoff: identity map into single stance about the front foot.
        if rec:
            nrow = _record(traj, nrow, t, 2, y, xsep, foot_x, back_x, 4.0)
        back_x = np.nan
        xsep = 0.0

    # Landing stance up to the section crossing.  A crossing only counts in
    # single stance: when the leg is already past vertical (double stance
    # carried theta beyond pi/2) the phase runs on and fails naturally.
    if abs(y[1] - HALF_PI) <= 1e-9:
        vx_sec = _stance_vx(y)
        if rec:
            nrow = _record(traj, nrow, t, 1, y, xsep, foot_x, back_x, 5.0)
        return STATUS_OK, gait, y[0], y[2], vx_sec, 1, t, foot_x, nrow
    status, ev, t, nrow = _phase(3, 1, y, 0.0, m, k, r0, g, alpha,
                                 rtol, atol, evtol, tmax, t,
                                 rec, rec_dt, traj, nrow, foot_x, back_x)
    if status != STATUS_OK:
        return status, gait, np.nan, np.nan, np.nan, 1, t, foot_x, nrow
    if ev == 0:
        vx_sec = _stance_vx(y)
        if rec:
            nrow = _record(traj, nrow, t, 1, y, 0.0, foot_x, back_x, 5.0)
        return STATUS_OK, gait, y[0], y[2], vx_sec, 1, t, foot_x, nrow
    if ev == 1:
        return STATUS_FORBIDDEN, gait, np.nan, np.nan, np.nan, 1, t, foot_x, _record(traj, nrow, t, 1, y, 0.0, foot_x, back_x, 8.0) if rec else nrow
    if ev == 2:
        return STATUS_FELL, gait, np.nan, np.nan, np.nan, 1, t, foot_x, _record(traj, nrow, t, 1, y, 0.0, foot_x, back_x, 6.0) if rec else nrow
    return STATUS_BACKWARD, gait, np.nan, np.nan, np.nan, 1, t, foot_x, _record(traj, nrow, t, 1, y, 0.0, foot_x, back_x, 7.0) if rec else nrow


@njit(cache=True)
def caap_steps_kernel(r, vy, alpha, gait_code, n_cap,
                      m, k, r0, g, E, rtol, atol, evtol, tmax):
    """Consecutive successful steps of one gait under a constant angle."""
    traj = np.empty((0, 9))
    count = 0
    for _ in range(n_cap):
        status, gait, r2, vy2, _vx, _fc, _t, _fx, _n = apply_step_kernel(
            r, vy, alpha, m, k, r0, g, E, rtol, atol, evtol, tmax,
            False, 0.0, traj, 0.0, 0.0)
        if status != STATUS_OK or gait != gait_code:
            break
        count += 1
        r = r2
        vy = vy2
    return count


@njit(cache=True)
def sweep_caap_kernel(rs, vys, alphas, gait_code, n_cap,
                      m, k, r0, g, E, rtol, atol, evtol, tmax, out):
    """Fill out[b, a] with CAAP step counts for each vertex and angle."""
    for b in range(rs.size):
        for a in range(alphas.size):
            out[b, a] = caap_steps_kernel(rs[b], vys[b], alphas[a], gait_code,
                                          n_cap, m, k, r0, g, E,
                                          rtol, atol, evtol, tmax)


@njit(cache=True)
def sweep_once_kernel(rs, vys, alphas, m, k, r0, g, E,
                      rtol, atol, evtol, tmax,
                      status_out, gait_out, r_out, vy_out):
    """Single-step sweep: outcome, realized gait and landing point."""
    traj = np.empty((0, 9))
    for b in range(rs.size):
        for a in range(alphas.size):
            status, gait, r2, vy2, _vx, _fc, _t, _fx, _n = apply_step_kernel(
                rs[b], vys[b], alphas[a], m, k, r0, g, E,
                rtol, atol, evtol, tmax, False, 0.0, traj, 0.0, 0.0)
            status_out[b, a] = status
            gait_out[b, a] = gait
            r_out[b, a] = r2
            vy_out[b, a] = vy2


@njit(cache=True)
def replay_kernel(r, vy, alphas, m, k, r0, g, E,
                  rtol, atol, evtol, tmax,
                  gait_out, r_out, vy_out):
    """Apply a per-step angle sequence; returns completed step count."""
    traj = np.empty((0, 9))
    n = alphas.size
    done = 0
    for i in range(n):
        status, gait, r2, vy2, _vx, _fc, _t, _fx, _n = apply_step_kernel(
            r, vy, alphas[i], m, k, r0, g, E,
            rtol, atol, evtol, tmax, False, 0.0, traj, 0.0, 0.0)
        if status != STATUS_OK:
            break
        gait_out[i] = gait
        r_out[i] = r2
        vy_out[i] = vy2
        r = r2
        vy = vy2
        done += 1
    return done


@njit(cache=True)
def replay_scores_kernel(rs, vys, alphas, m, k, r0, g, E,
                         rtol, atol, evtol, tmax, done_out, trans_out):
    """Scan start states: completed steps and gait changes along a sequence."""
    n = alphas.size
    gaits = np.empty(n, dtype=np.int8)
    rr = np.empty(n)
    vv = np.empty(n)
    for b in range(rs.size):
        done = replay_kernel(rs[b], vys[b], alphas, m, k, r0, g, E,
                             rtol, atol, evtol, tmax, gaits, rr, vv)
        trans = 0
        for i in range(1, done):
            if gaits[i] != gaits[i - 1]:
                trans += 1
        done_out[b] = done
        trans_out[b] = trans
