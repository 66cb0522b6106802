"""Tests for recursive targets, cooperative plans and merge checks."""
import pytest

from merger.core.control import rollout
from merger.core.errors import DegenerateSpeed, HorizonTooShort, InvalidConfig
from merger.core.kinematics import Lane, VehicleState
from merger.core.metrics import merging_time_gap
from merger.core.planner import (CooperationMode, MergeSpec, Sequence, check_merge_constraints,
                                 clearance_time, lead_and_follow, plan_cooperative, recursive_step,
                                 terminal_target)


@pytest.mark.parametrize("sequence, mainline, expected", [
    (Sequence.MAINLINE_LEADS, VehicleState(0.0, 50.0, 25.0), 252.5),
    (Sequence.ONRAMP_LEADS, VehicleState(0.0, -20.0, 25.0), 277.5),
    (Sequence.ONRAMP_LEADS, VehicleState(0.0, -100.0, 20.0), 260.0),
])
def test_terminal_target(sequence, mainline, expected):
    spec = MergeSpec(t_mer=10.0, p_merge=260.0, sequence=sequence)
    pf, vf = terminal_target(spec, mainline, 0.0)
    assert pf == pytest.approx(expected)
    assert vf == mainline.v


def test_terminal_target_needs_horizon():
    spec = MergeSpec(t_mer=10.0, p_merge=260.0, sequence=Sequence.ONRAMP_LEADS)
    with pytest.raises(HorizonTooShort):
        terminal_target(spec, VehicleState(9.9, 0.0, 25.0), 9.9)


def test_recursive_step_fixed_points():
    spec = MergeSpec(t_mer=10.0, p_merge=240.0, sequence=Sequence.MAINLINE_LEADS)
    mainline = VehicleState(0.0, 50.0, 25.0)
    assert recursive_step(VehicleState(0.0, 2.5, 25.0), mainline, spec, 0.0) == pytest.approx(0.0, abs=1e-9)
    # on the constant-acceleration path 27.5 + 20 t + t^2 / 4 to (252.5, 25)
    assert recursive_step(VehicleState(0.0, 27.5, 20.0), mainline, spec, 0.0) == pytest.approx(0.5)
    t = 4.0
    on_path = VehicleState(t, 27.5 + 20.0 * t + 0.25 * t ** 2, 20.0 + 0.5 * t)
    ml = VehicleState(t, 50.0 + 25.0 * t, 25.0)
    assert recursive_step(on_path, ml, spec, t) == pytest.approx(0.5)


def test_clearance_time_on_grid():
    spec = MergeSpec(t_mer=11.0, p_merge=260.0, sequence=Sequence.MAINLINE_LEADS)
    assert clearance_time(spec, 0.04) == pytest.approx(9.2)


def test_bilateral_onramp_leads_plan():
    spec = MergeSpec(t_mer=11.0, p_merge=260.0, sequence=Sequence.ONRAMP_LEADS)
    onramp, mainline = VehicleState(0.0, 0.0, 22.0), VehicleState(0.0, -47.8, 25.0)
    plan = plan_cooperative(onramp, mainline, spec, CooperationMode.BILATERAL, 0.0)
    on = rollout(plan.law_onramp, onramp.p, onramp.v, 0.04, lane=Lane.ONRAMP)
    ml = rollout(plan.law_mainline, mainline.p, mainline.v, 0.04, lane=Lane.MAINLINE)
    assert on.p[-1] == pytest.approx(260.0, abs=1e-6)
    assert ml.p[-1] == pytest.approx(212.5, abs=1e-6)
    assert on.v[-1] == pytest.approx(25.0) and ml.v[-1] == pytest.approx(25.0)
    check = check_merge_constraints(on.last, ml.last, spec)
    assert check.ok
    assert check.gap_s == pytest.approx(1.8, abs=1e-6)


def test_bilateral_mainline_leads_plan_clears_early():
    spec = MergeSpec(t_mer=11.0, p_merge=260.0, sequence=Sequence.MAINLINE_LEADS)
    onramp, mainline = VehicleState(0.0, 0.0, 22.0), VehicleState(0.0, 20.0, 25.0)
    plan = plan_cooperative(onramp, mainline, spec, CooperationMode.BILATERAL, 0.0)
    assert plan.law_mainline.tf == pytest.approx(9.2)
    on = rollout(plan.law_onramp, onramp.p, onramp.v, 0.04, lane=Lane.ONRAMP)
    ml = rollout(plan.law_mainline, mainline.p, mainline.v, 0.04, lane=Lane.MAINLINE, t_end=11.0)
    assert ml.p[-1] == pytest.approx(307.5, abs=1e-6)
    lead, follow = lead_and_follow(on, ml, spec.sequence)
    assert merging_time_gap(lead, follow, spec.p_merge, spec.l) == pytest.approx(1.8, abs=1e-6)


def test_satisfied_constraints_give_zero_laws():
    spec = MergeSpec(t_mer=10.0, p_merge=250.0, sequence=Sequence.ONRAMP_LEADS)
    plan = plan_cooperative(VehicleState(0.0, 0.0, 25.0), VehicleState(0.0, -47.5, 25.0),
                            spec, CooperationMode.BILATERAL, 0.0)
    for law in plan:
        assert law.alpha == pytest.approx(0.0, abs=1e-9)
        assert law.beta == pytest.approx(0.0, abs=1e-9)


def test_unilateral_plan_leaves_mainline_alone():
    spec = MergeSpec(t_mer=11.0, p_merge=260.0, sequence=Sequence.ONRAMP_LEADS)
    onramp, mainline = VehicleState(0.0, 0.0, 22.0), VehicleState(0.0, -47.8, 25.0)
    plan = plan_cooperative(onramp, mainline, spec, 'unilateral', 0.0)
    assert plan.law_mainline.alpha == 0.0 and plan.law_mainline.beta == 0.0
    on = rollout(plan.law_onramp, onramp.p, onramp.v, 0.04)
    assert on.p[-1] == pytest.approx(274.7, abs=1e-6)


def test_cooperation_too_late():
    spec = MergeSpec(t_mer=11.0, p_merge=260.0, sequence=Sequence.MAINLINE_LEADS)
    with pytest.raises(HorizonTooShort):
        plan_cooperative(VehicleState(10.0, 230.0, 22.0), VehicleState(10.0, 280.0, 25.0),
                         spec, CooperationMode.BILATERAL, 10.0)
    # onramp horizon is fine but the clearance time has passed
    with pytest.raises(HorizonTooShort):
        plan_cooperative(VehicleState(9.5, 200.0, 22.0), VehicleState(9.5, 260.0, 25.0),
                         spec, CooperationMode.BILATERAL, 9.5)


def test_check_merge_constraints():
    spec = MergeSpec(t_mer=10.0, p_merge=260.0, sequence=Sequence.MAINLINE_LEADS)
    check = check_merge_constraints(VehicleState(10.0, 252.5, 25.0), VehicleState(10.0, 300.0, 25.0), spec)
    assert check.gap_s == pytest.approx(1.8)
    assert check.ok
    side_by_side = check_merge_constraints(VehicleState(10.0, 260.0, 25.0),
                                           VehicleState(10.0, 260.0, 27.0), spec)
    assert side_by_side.gap_s < 0
    assert not side_by_side.speed_ok and not side_by_side.ok
    with pytest.raises(DegenerateSpeed):
        check_merge_constraints(VehicleState(10.0, 200.0, 0.0), VehicleState(10.0, 300.0, 25.0), spec)


def test_merge_spec_validation():
    with pytest.raises(InvalidConfig):
        MergeSpec(t_mer=10.0, p_merge=260.0, sequence='onramp_leads', h=0.0)
    with pytest.raises(ValueError):
        MergeSpec(t_mer=10.0, p_merge=260.0, sequence='sideways')
