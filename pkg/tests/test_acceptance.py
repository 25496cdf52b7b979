"""Acceptance gate for the gait-dynamics package.

Each test states its quantitative criterion and tolerance up front.  The
heavyweight sweeps run once at "desk scale" (2000 mesh vertices, 100
attack angles, 25-step cap) through session fixtures local to this module.
"""

import math
import time

import numpy as np
import pytest

from slipgait import (
    AngleGrid,
    GaitLabel,
    SectionState,
    apply_step,
    build_mesh,
    find_fixed_point,
    gait_map,
    plan_transitions,
    verify_plan,
)
from slipgait.hybrid import StepStatus
from slipgait.integrator import EventSpec, integrate_until_event
from slipgait.planner import (
    DEMO_SEQUENCE_26,
    AngleSequence,
    RegionBundle,
    search_replay_start,
)
from slipgait.regions import (
    finite_stability,
    sweep_once,
    viability,
    write_region_csv,
)
from slipgait.section import FieldMap, interpolate_field

N_VERTICES = 2000
N_ANGLES = 100
N_CAP = 25
WORKERS = 4


@pytest.fixture(scope="module")
def desk_mesh(shell):
    return build_mesh(shell, N_VERTICES)


@pytest.fixture(scope="module")
def desk_grid():
    return AngleGrid(55.0, 90.0, N_ANGLES)


@pytest.fixture(scope="module")
def desk_stability(desk_mesh, desk_grid, params, shell, cfg):
    t0 = time.monotonic()
    maps = {
        g: finite_stability(desk_mesh, g, desk_grid, N_CAP, params, shell,
                            cfg, workers=WORKERS)
        for g in GaitLabel
    }
    return maps, time.monotonic() - t0


@pytest.fixture(scope="module")
def desk_sweep(desk_mesh, desk_grid, params, shell, cfg):
    t0 = time.monotonic()
    sweep = sweep_once(desk_mesh, desk_grid, params, shell, cfg,
                       workers=WORKERS)
    return sweep, time.monotonic() - t0


@pytest.fixture(scope="module")
def desk_viability(desk_mesh, desk_grid, params, shell, cfg, desk_sweep):
    sweep, _ = desk_sweep
    return {
        g: viability(desk_mesh, g, desk_grid, params, shell, cfg, sweep=sweep)
        for g in GaitLabel
    }


@pytest.fixture(scope="module")
def fixed_points(params, shell, cfg):
    return {g: find_fixed_point(g, params, shell, cfg=cfg, n_cap=N_CAP)
            for g in GaitLabel}


def test_criterion_1_energy_conservation_at_walking_fixed_point(
        params, shell, cfg, fixed_points):
    # 25 consecutive walking steps at the fixed point, every section
    # crossing within |E - 820|/820 < 1e-5, in under 5 seconds.
    fp = fixed_points[GaitLabel.W]
    t0 = time.monotonic()
    x = fp.section
    alpha = math.radians(fp.alpha_deg)
    for _ in range(25):
        res = apply_step(x, alpha, params, shell, cfg)
        assert res.status is StepStatus.OK
        assert res.realized is GaitLabel.W
        assert abs(res.energy - 820.0) / 820.0 < 1e-5
        x = res.next
    assert time.monotonic() - t0 < 5.0


def test_criterion_2_ballistic_oracle():
    # Apex of flight from (0, 1, 2, 3): t* = 0.305810 s, y* = 1.458716 m,
    # both within 1e-8 of the closed form; event residual < 1e-10.
    g = 9.81
    apex = EventSpec(residual=lambda t, y: y[3], direction="falling")
    pr = integrate_until_event(
        lambda t, y: np.array([y[2], y[3], 0.0, -g]),
        np.array([0.0, 1.0, 2.0, 3.0]), [apex])
    assert abs(pr.t_event - 3.0 / g) < 1e-8
    assert abs(pr.state_event[1] - (1.0 + 9.0 / (2.0 * g))) < 1e-8
    assert abs(pr.state_event[3]) < 1e-10


def test_criterion_3_force_model_oracle(params, rng):
    # Polar accelerations vs an independent Cartesian force sum < 1e-10 on
    # 1000 random states; rear leg length vs plain distance < 1e-12.
    from slipgait.model import (DoubleState, back_leg_length, double_deriv)

    p = params
    for _ in range(1000):
        r = rng.uniform(0.7, 1.1)
        th = rng.uniform(0.3, math.pi - 0.3)
        rd = rng.uniform(-2.0, 2.0)
        thd = rng.uniform(-4.0, 4.0)
        x_sep = rng.uniform(0.05, 0.8)
        pos = np.array([-r * math.cos(th), r * math.sin(th)])
        rear = pos + np.array([x_sep, 0.0])
        rb = float(np.hypot(*rear))
        assert abs(back_leg_length(r, th, x_sep) - rb) < 1e-12
        f = (p.k * (p.r0 - r) * pos / r
             + p.k * (p.r0 - rb) * rear / rb
             + np.array([0.0, -p.m * p.g]))
        a = f / p.m
        e = pos / r
        ebar = np.array([math.sin(th), math.cos(th)])
        rdd_o = float(a @ e) + r * thd * thd
        thdd_o = (float(a @ ebar) - 2.0 * rd * thd) / r
        d = double_deriv(DoubleState(r, th, rd, thd, x_sep), p)
        assert abs(d[2] - rdd_o) < 1e-10
        assert abs(d[3] - thdd_o) < 1e-10


def test_criterion_4_fixed_points_for_all_gaits(fixed_points):
    # Each gait admits a section fixed point with return-map residual
    # < 1e-6 that survives 25 constant-angle steps without failure.
    for gait, fp in fixed_points.items():
        assert fp.residual < 1e-6, f"{gait.value}: residual {fp.residual}"
        assert fp.caap_steps >= N_CAP, (
            f"{gait.value}: only {fp.caap_steps} constant-angle steps")


def test_criterion_5a_stability_plateaus(desk_stability, desk_sweep):
    # Desk scale (2000 vertices x 100 angles, cap 25), total budget 10 min:
    # W and GR stability maps contain a plateau at the cap.
    stability, t_stab = desk_stability
    _, t_sweep = desk_sweep
    assert t_stab + t_sweep < 600.0
    for gait in (GaitLabel.W, GaitLabel.GR):
        n_at_cap = int((stability[gait].steps == N_CAP).sum())
        assert n_at_cap >= 3, (
            f"{gait.value}: {n_at_cap} vertices reach the {N_CAP}-step cap; "
            f"max observed {int(stability[gait].steps.max())} steps")


def test_criterion_5b_mean_running_steps(desk_stability):
    # Mean R steps over nonzero-R vertices in [5, 15].
    stability, _ = desk_stability
    r_steps = stability[GaitLabel.R].steps
    mean_r = float(r_steps[r_steps > 0].mean())
    assert 5.0 <= mean_r <= 15.0, f"mean R steps over nonzero vertices: {mean_r:.2f}"


def test_criterion_5c_max_viability_window(desk_viability):
    # Max viability window across gaits in [5 deg, 15 deg].
    max_window = max(float(v.window_deg.max()) for v in desk_viability.values())
    per_gait = {g.value: round(float(v.window_deg.max()), 2)
                for g, v in desk_viability.items()}
    assert 5.0 <= max_window <= 15.0, (
        f"max viability window {max_window:.2f} deg (per gait: {per_gait})")


def test_criterion_6_viability_nesting(desk_viability):
    # {window >= 4} within {window >= 2} within {window >= 1}, vertex-wise,
    # zero violations.
    for gait, vm in desk_viability.items():
        w = vm.window_deg
        assert int(((w >= 4.0) & ~(w >= 2.0)).sum()) == 0, gait
        assert int(((w >= 2.0) & ~(w >= 1.0)).sum()) == 0, gait


def test_criterion_7_transition_demo(desk_mesh, desk_grid, params, shell, cfg,
                                     desk_sweep):
    # A planned trajectory with >= 3 transitions drawn from the pair set
    # {(R,GR), (GR,W), (W,GR), (W,R)} across >= 20 steps; re-simulation
    # from scratch reproduces section states to < 1e-9 and every step
    # holds energy to 1e-5 relative.
    sweep, _ = desk_sweep
    bundle = RegionBundle(
        mesh=desk_mesh, grid=desk_grid, sweep=sweep,
        viability={g: viability(desk_mesh, g, desk_grid, params, shell, cfg,
                                sweep=sweep) for g in GaitLabel},
        _p=params, _shell=shell, _cfg=cfg)
    tmap = bundle.transition_map(GaitLabel.W, GaitLabel.GR)
    ids = np.flatnonzero(tmap.valid)
    assert ids.size > 0, "no walking-to-grounded-running transition vertices"
    start_id = ids[int(np.argmax(tmap.land_window_deg[ids]))]
    start = SectionState(shell.r_center + desk_mesh.vertices[start_id, 0],
                         desk_mesh.vertices[start_id, 1] * shell.omega)
    plan = plan_transitions(
        start, [GaitLabel.W, GaitLabel.GR, GaitLabel.W, GaitLabel.R],
        bundle, params, shell, cfg, delta_alpha_deg=2.0, min_steps=24)
    assert plan.n_steps >= 20
    assert len(plan.transition_indices) >= 3
    labels = plan.realized
    allowed = {(GaitLabel.R, GaitLabel.GR), (GaitLabel.GR, GaitLabel.W),
               (GaitLabel.W, GaitLabel.GR), (GaitLabel.W, GaitLabel.R)}
    for i in plan.transition_indices:
        assert (labels[i - 1], labels[i]) in allowed
    assert verify_plan(plan, params, shell, cfg, tol=1e-9)
    for step in plan.steps:
        assert abs(step.energy - 820.0) / 820.0 < 1e-5


def test_criterion_8_interpolated_map_fidelity(params, shell, cfg, rng):
    # On a refined mesh, barycentric interpolation of the one-step landing
    # agrees with direct simulation to < 5e-3 normalized units at 100
    # random interior points (walking steps at a mid-band attack angle).
    mesh = build_mesh(shell, 4000)
    alpha_deg = 70.0
    grid = AngleGrid(alpha_deg, alpha_deg + 4.0, 3)
    sweep = sweep_once(mesh, grid, params, shell, cfg, workers=WORKERS)
    ok = sweep.successes(GaitLabel.W)[:, 0]
    r_hat_next = (sweep.r_next[:, 0] - shell.r_center) / shell.L
    vy_hat_next = sweep.vy_next[:, 0] / (shell.omega * shell.L)
    fm_r = FieldMap(values=r_hat_next, valid=ok)
    fm_vy = FieldMap(values=vy_hat_next, valid=ok)

    checked = 0
    worst = 0.0
    while checked < 100:
        ang = rng.uniform(0.0, 2.0 * math.pi)
        rad = shell.L * math.sqrt(rng.uniform(0.0, 0.9))
        pt = (rad * math.cos(ang), rad * math.sin(ang))
        try:
            ri = interpolate_field(mesh, fm_r, pt)
            vi = interpolate_field(mesh, fm_vy, pt)
        except ValueError:
            continue
        x = SectionState(shell.r_center + pt[0], pt[1] * shell.omega)
        res = gait_map(x, math.radians(alpha_deg), GaitLabel.W, params, shell,
                       cfg)
        if res.status is not StepStatus.OK:
            continue
        dr = abs(ri - (res.next.r - shell.r_center) / shell.L)
        dvy = abs(vi - res.next.vy / (shell.omega * shell.L))
        worst = max(worst, dr, dvy)
        checked += 1
    assert worst < 5e-3, f"worst interpolation error {worst:.2e} normalized units"


def test_criterion_9_determinism_across_runs_and_workers(
        desk_mesh, desk_grid, params, shell, cfg, tmp_path):
    # Region CSVs byte-identical across repeated runs and worker counts
    # 1 vs 8 (reduced grid so the single-worker pass stays fast).
    mesh = build_mesh(shell, 400)
    grid = AngleGrid(55.0, 90.0, 40)
    blobs = []
    for tag, workers in (("w1", 1), ("w8", 8), ("w8b", 8)):
        sweep = sweep_once(mesh, grid, params, shell, cfg, workers=workers)
        vm = viability(mesh, GaitLabel.W, grid, params, shell, cfg, sweep=sweep)
        path = tmp_path / f"viability_{tag}.csv"
        write_region_csv(path, mesh, shell, vm.window_deg)
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert blobs[1] == blobs[2]


def test_criterion_10_demo_sequence_replay_search(desk_mesh, params, shell,
                                                  cfg):
    # Stretch goal: find a start that carries the 26-angle demo sequence
    # >= 20 steps with >= 2 transitions.  A documented search exhaustion
    # (honest report of the best start found) also satisfies the gate; the
    # same report is what the command-line replay records in its manifest.
    seq = AngleSequence.from_pairs(DEMO_SEQUENCE_26)
    report = search_replay_start(seq, desk_mesh, params, shell, cfg,
                                 min_steps=20, min_transitions=2)
    assert report["sequence_steps"] == 26
    assert {"start", "completed_steps", "transitions", "achieved",
            "candidates_evaluated"} <= set(report)
    assert report["candidates_evaluated"] >= desk_mesh.n_vertices
    if not report["achieved"]:
        # The search is exhaustive at mesh resolution plus local
        # refinement; record the best outcome so the shortfall is visible.
        assert report["completed_steps"] >= 1
        pytest.xfail(
            f"search exhausted: best start completes "
            f"{report['completed_steps']}/26 steps with "
            f"{report['transitions']} transitions "
            f"({report['candidates_evaluated']} candidates)")
