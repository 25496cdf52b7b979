"""Angle sequences, replay, fixed points and plan synthesis."""

import json
import math

import numpy as np
import pytest

from slipgait.hybrid import GaitLabel
from slipgait.planner import (
    DEMO_SEQUENCE_26,
    AngleSequence,
    NoPlanFoundError,
    PlanResult,
    RegionBundle,
    find_fixed_point,
    plan_transitions,
    replay,
    search_replay_start,
    verify_plan,
)
from slipgait.regions import AngleGrid
from slipgait.section import SectionState


def test_angle_sequence_parse_and_expand():
    seq = AngleSequence.parse("81.886x5,88.5")
    assert list(seq.expand_deg()) == [81.886] * 5 + [88.5]
    assert len(AngleSequence.from_pairs(DEMO_SEQUENCE_26).expand_deg()) == 26


def test_angle_sequence_rejects_garbage():
    with pytest.raises(ValueError):
        AngleSequence.parse("")
    with pytest.raises(ValueError):
        AngleSequence.parse("65x0")
    with pytest.raises(ValueError):
        AngleSequence.parse("sixty")


def test_replay_runs_steps_and_stops_at_first_failure(params, shell, cfg):
    # From a state on the walking band, a long run of viable angles works
    # and an absurd angle afterwards fails with a recorded reason.
    start = SectionState(0.9777, 0.0)
    good = AngleSequence.parse("65x5")
    res = replay(start, good, params, shell, cfg)
    assert res.n_steps == 5
    assert res.failure is None
    assert all(s.realized is GaitLabel.W for s in res.steps)

    bad = AngleSequence.parse("65x2,89.9")
    res2 = replay(start, bad, params, shell, cfg)
    assert res2.n_steps < 3
    assert res2.failure is not None
    assert res2.failure["step_index"] == res2.n_steps
    assert isinstance(res2.failure["reason"], str)


def test_plan_result_serialization_roundtrip(params, shell, cfg):
    start = SectionState(0.9777, 0.0)
    res = replay(start, AngleSequence.parse("65x3"), params, shell, cfg)
    blob = json.loads(res.to_json())
    assert len(blob["steps"]) == 3
    assert blob["start"]["r_m"] == pytest.approx(0.9777)
    assert blob["transition_indices"] == []
    for step in blob["steps"]:
        assert set(step) >= {"alpha_deg", "realized", "after", "energy_J"}
        assert set(step["after"]) == {"r_m", "vy_m_s"}


def test_fixed_point_walking(params, shell, cfg):
    fp = find_fixed_point(GaitLabel.W, params, shell, cfg=cfg, n_cap=10)
    assert fp.residual < 1e-6
    assert fp.caap_steps >= 10
    assert 55.0 <= fp.alpha_deg <= 90.0
    assert abs(fp.section.vy) < 1e-8


@pytest.fixture(scope="module")
def bundle(small_mesh, small_grid, params, shell, cfg):
    return RegionBundle.compute(small_mesh, small_grid, params, shell, cfg,
                                workers=2)


def test_single_gait_plan_has_no_transitions(params, shell, cfg, bundle):
    plan = plan_transitions(SectionState(0.9777, 0.0), [GaitLabel.W], bundle,
                            params, shell, cfg, min_steps=8, max_steps=20)
    assert plan.n_steps >= 8
    assert plan.transition_indices == []
    assert verify_plan(plan, params, shell, cfg)


def test_unreachable_itinerary_raises(params, shell, cfg, bundle):
    x_edge = SectionState(shell.r_center + 0.999 * shell.L, 0.0)
    with pytest.raises(NoPlanFoundError):
        plan_transitions(x_edge, [GaitLabel.GR, GaitLabel.W], bundle, params,
                         shell, cfg)


def test_verify_plan_detects_tampering(params, shell, cfg, bundle):
    plan = plan_transitions(SectionState(0.9777, 0.0), [GaitLabel.W], bundle,
                            params, shell, cfg, min_steps=5, max_steps=20)
    assert verify_plan(plan, params, shell, cfg)
    tampered = PlanResult(start=SectionState(plan.start.r + 1e-4, plan.start.vy),
                          steps=list(plan.steps))
    assert not verify_plan(tampered, params, shell, cfg)


def test_search_replay_start_report_shape(small_mesh, params, shell, cfg):
    seq = AngleSequence.parse("65x4")
    rep = search_replay_start(seq, small_mesh, params, shell, cfg,
                              min_steps=4, min_transitions=0, refine_rounds=1)
    assert rep["sequence_steps"] == 4
    assert rep["achieved"] is True
    assert rep["completed_steps"] >= 4
    assert rep["candidates_evaluated"] >= small_mesh.n_vertices
    assert {"r_m", "vy_m_s"} <= set(rep["start"])
