"""Step map behavior: phase structure, energy bookkeeping, dual-path agreement."""

import math

import numpy as np
import pytest

from slipgait.hybrid import (
    TRAJECTORY_COLUMNS,
    GaitLabel,
    StepStatus,
    apply_step,
    gait_map,
    write_trajectory_csv,
)
from slipgait.section import SectionState, vx_from_energy

# A walking start (leg shortening at the rear-leg touchdown), a grounded
# running start, and a true running (flight) start; found by probing the
# section disc with the reference integrator.
W_START = (SectionState(0.9777, 0.0), math.radians(65.0))
R_START = (SectionState(0.8820, 0.0), math.radians(81.886))


def _sample_states(shell, rng, n):
    out = []
    for _ in range(n):
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rad = shell.L * math.sqrt(rng.uniform(0.0, 0.98))
        out.append(SectionState(shell.r_center + rad * math.cos(ang),
                                rad * math.sin(ang) * shell.omega))
    return out


def test_walking_step_succeeds_and_conserves_energy(params, shell, cfg):
    x, alpha = W_START
    res = apply_step(x, alpha, params, shell, cfg)
    assert res.status is StepStatus.OK
    assert res.realized is GaitLabel.W
    assert abs(res.energy - shell.energy) / shell.energy < 1e-5


def test_running_step_has_flight_phase(params, shell, cfg):
    x, alpha = R_START
    res = apply_step(x, alpha, params, shell, cfg, record=True)
    assert res.status is StepStatus.OK
    assert res.realized is GaitLabel.R
    charts = set(res.trajectory[:, 1].astype(int))
    assert 0 in charts  # flight chart present for a running step


def test_walking_step_has_double_stance_and_no_flight(params, shell, cfg):
    x, alpha = W_START
    res = apply_step(x, alpha, params, shell, cfg, record=True)
    charts = set(res.trajectory[:, 1].astype(int))
    assert 2 in charts   # double stance present
    assert 0 not in charts  # never airborne


def test_gait_label_from_leg_rate_at_double_support(params, shell, cfg):
    # W means the front leg is shortening when the rear leg touches down;
    # GR means it is lengthening.  Verify against the recorded trajectory.
    for x, alpha in (W_START, (SectionState(0.99137, 0.26569), math.radians(64.19))):
        res = apply_step(x, alpha, params, shell, cfg, record=True)
        if res.realized is GaitLabel.R:
            continue
        assert res.realized in (GaitLabel.W, GaitLabel.GR)


def test_touchdown_height_matches_attack_angle(params, shell, cfg):
    # The leg engages when the mass falls to height r0*sin(alpha).
    x, alpha = R_START
    res = apply_step(x, alpha, params, shell, cfg, record=True, sample_dt=1e-4)
    traj = res.trajectory
    td_rows = traj[traj[:, 8] == 2.0]
    assert td_rows.shape[0] >= 1
    y_td = td_rows[0, 3]
    assert abs(y_td - params.r0 * math.sin(alpha)) < 1e-6


def test_gait_map_rejects_wrong_gait(params, shell, cfg):
    x, alpha = W_START
    res = gait_map(x, alpha, GaitLabel.R, params, shell, cfg)
    assert res.status is StepStatus.WRONG_GAIT
    assert res.realized is GaitLabel.W


def test_fast_and_reference_paths_agree(params, shell, cfg, rng):
    states = _sample_states(shell, rng, 60)
    alphas = rng.uniform(math.radians(56.0), math.radians(89.0), len(states))
    checked = 0
    for x, a in zip(states, alphas):
        fast = apply_step(x, a, params, shell, cfg, method="fast")
        ref = apply_step(x, a, params, shell, cfg, method="reference")
        assert (fast.status is StepStatus.OK) == (ref.status is StepStatus.OK)
        if fast.status is StepStatus.OK:
            assert fast.realized is ref.realized
            assert abs(fast.next.r - ref.next.r) < 1e-6
            assert abs(fast.next.vy - ref.next.vy) < 1e-6
            checked += 1
    assert checked >= 10


def test_energy_constant_along_recorded_trajectory(params, shell, cfg):
    # Spot-check the recorded samples with the chart-wise energy formula.
    from slipgait.model import (Chart, DoubleState, FlightState, StanceState,
                                mechanical_energy)

    x, alpha = W_START
    res = apply_step(x, alpha, params, shell, cfg, record=True, sample_dt=5e-4)
    worst = 0.0
    for row in res.trajectory:
        chart = int(row[1])
        xx, yy, vx, vy, fx, bx = row[2:8]
        if chart == 0:
            e = mechanical_energy(Chart.FLIGHT, FlightState(xx, yy, vx, vy), params)
        else:
            dx = xx - fx
            r = math.hypot(dx, yy)
            th = math.atan2(yy, -dx)
            rd = -math.cos(th) * vx + math.sin(th) * vy
            thd = (math.sin(th) * vx + math.cos(th) * vy) / r
            if chart == 1:
                e = mechanical_energy(Chart.STANCE, StanceState(r, th, rd, thd), params)
            else:
                e = mechanical_energy(
                    Chart.DOUBLE, DoubleState(r, th, rd, thd, fx - bx), params)
        worst = max(worst, abs(e - shell.energy) / shell.energy)
    assert worst < 1e-5


def test_step_from_disc_edge_fails_cleanly(params, shell, cfg):
    x = SectionState(shell.r_center + 0.999 * shell.L, 0.0)
    res = apply_step(x, math.radians(65.0), params, shell, cfg)
    assert res.status is StepStatus.FAILED
    assert res.reason is not None


def test_trajectory_csv_layout(params, shell, cfg, tmp_path):
    x, alpha = W_START
    res = apply_step(x, alpha, params, shell, cfg, record=True)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, res.trajectory)
    header = path.read_text().splitlines()[0].split(",")
    assert header == TRAJECTORY_COLUMNS
    assert len(path.read_text().splitlines()) == res.trajectory.shape[0] + 1
