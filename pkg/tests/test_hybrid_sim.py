import numpy as np
import pytest
from hypothesis import given, settings

from conftest import random_case, seeds
from oracles import check_invariants, euler_cost
from persmon.hybrid_sim import (Region, SegmentState, classify_mode, cost,
                                next_event, segment_integrals, simulate, simulate_team)
from persmon.model import ConfigError, SamplePoint, SwitchingSchedule, uniform_config


def test_example_values(ex1):
    assert simulate(ex1, [17.81, 1.29]).cost == pytest.approx(10.236, abs=5e-4)
    J12 = simulate(ex1, [12.0]).cost
    assert J12 == pytest.approx(euler_cost(ex1, [12.0], dt=1e-3), rel=1e-3)


def test_cost_helper_matches_engine_integral(ex1):
    traj = simulate(ex1, [17.81, 1.29])
    assert cost(traj) == pytest.approx(traj.cost, rel=1e-12)


def test_segment_integrals_closed_form():
    # R = 2 - t + 0.5 t^2 over [0, 2] integrates to 4 - 2 + 4/3
    assert segment_integrals(2.0, -1.0, 1.0, 2.0) == pytest.approx(4 - 2 + 4 / 3)


def test_first_event_from_start(ex1):
    events = next_event(ex1, [12.0], SegmentState(0.0, 0.0, 1.0, ex1.R0.copy()))
    w = 4 * (1 - 0.01 / 3)
    assert [e.kind for e in events] == ["cross"]
    assert events[0].time == pytest.approx(4 - w)
    assert events[0].index == 4


def test_next_event_ties_are_ordered(ex1):
    # s = 12 is a point, the range edge of two others and the switch
    state = SegmentState(11.995, 11.995, 1.0, ex1.R0.copy())
    events = next_event(ex1, [12.0], state)
    kinds = [e.kind for e in events]
    assert kinds == ["cross"] * 3 + ["switch"]
    assert all(e.time == pytest.approx(12.0) for e in events)


def test_classify_mode_boundaries(ex1):
    pt = ex1.points[10]  # alpha = 10
    assert classify_mode(pt, 5.0, 1, 2.0, ex1).region == Region.FAR_LEFT
    assert classify_mode(pt, 6.0, 1, 2.0, ex1).region == Region.NEAR_LEFT_RISING
    assert classify_mode(pt, 6.0, -1, 2.0, ex1).region == Region.FAR_LEFT
    assert classify_mode(pt, 10.0, 1, 2.0, ex1).region == Region.NEAR_RIGHT_FALLING
    assert classify_mode(pt, 10.0, -1, 2.0, ex1).region == Region.NEAR_LEFT_FALLING
    assert classify_mode(pt, 10.0, 1, 0.0, ex1).region == Region.EMPTY_DWELL
    assert classify_mode(pt, 10.0, 1, 0.0, ex1).mode_set == "Q1"
    assert classify_mode(pt, 13.5, 1, 2.0, ex1).mode_set == "Q4"
    assert classify_mode(pt, 20.0, 1, 2.0, ex1).mode_set == "Q2"


def test_infeasible_schedule_rejected(ex1):
    with pytest.raises(ConfigError):
        simulate(ex1, [12.0, 16.0, 4.0])


def test_reflection_without_switches():
    cfg = uniform_config(10, 2, 3, 25, 5, 0.1, 1.0)
    traj = simulate(cfg, [])
    walls = [e.boundary for e in traj.reflect_events()]
    assert walls == [10.0, 0.0]
    assert traj.position(25.0) == pytest.approx(5.0)
    assert not traj.satisfies_prop1()


def test_zero_initial_uncertainty_stays_bounded():
    cfg = uniform_config(10, 2, 3, 30, 6, 0.5, 0.0)
    traj = simulate(cfg, [8.0, 2.0, 8.0])
    check_invariants(traj)
    assert traj.min_uncertainty().min() == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_invariants_random(seed):
    cfg, sched = random_case(seed)
    traj = simulate(cfg, sched)
    check_invariants(traj)
    reached = [e.index for e in traj.switch_events()]
    assert reached == list(range(1, len(reached) + 1))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_dwell_exit_rate_is_continuous(seed):
    cfg, sched = random_case(seed)
    traj = simulate(cfg, sched)
    leave = traj.dwell[:-1] & ~traj.dwell[1:]
    k, i = np.nonzero(leave)
    # leaving the empty dwell happens where inflow and drain balance
    np.testing.assert_allclose(traj.rate0[k + 1, i], 0.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_events_are_complete(seed):
    """Every zero of R and every critical crossing appears as an event."""
    cfg, sched = random_case(seed)
    traj = simulate(cfg, sched)
    s_end, R_end = traj.segment_end_state()
    empties = {(round(e.time, 9), e.index) for e in traj.events if e.kind == "empty"}
    k, i = np.nonzero((R_end <= 0) & (traj.R0 > 0))
    for kk, ii in zip(k, i):
        assert (round(float(traj.t1[kk]), 9), int(ii)) in empties
    crit = cfg.alphas[:, None] + np.array([-1, 1])[None] * cfg.r
    for kk in range(traj.K):
        lo, hi = sorted((traj.s0[kk], s_end[kk]))
        inside = (crit > lo + 1e-9) & (crit < hi - 1e-9)
        assert not inside.any(), "a segment spans a sensing-range boundary"


def test_sample_grid_strictly_increasing(ex1):
    traj = simulate(ex1, [17.81, 1.29])
    t, s, R = traj.sample(0.5)
    assert np.all(np.diff(t) > 0)
    assert t[0] == 0.0 and t[-1] == pytest.approx(36.0)
    assert R.shape == (len(t), 21)
    assert np.all(R >= 0)


def test_team_of_one_matches_event_driven(ex1):
    sched = SwitchingSchedule((17.81, 1.29))
    *_, J = simulate_team(ex1, [sched], dt=1e-3)
    assert J == pytest.approx(simulate(ex1, sched).cost, rel=2e-3)


def test_second_agent_lowers_cost(ex1):
    one = simulate_team(ex1, [SwitchingSchedule((17.81, 1.29))], dt=5e-3)[-1]
    two = simulate_team(ex1, [SwitchingSchedule((17.81, 1.29)), SwitchingSchedule((10.0,))],
                        dt=5e-3, starts=[0.0, 20.0])[-1]
    assert two < one


def test_time_varying_inflow_changes_rates():
    pts = tuple(SamplePoint(float(a), 0.1, 1.0, ((5.0, 0.4),)) for a in (2.0, 8.0))
    from persmon.model import MissionConfig
    cfg = MissionConfig(10.0, 2.0, 3.0, 10.0, pts)
    traj = simulate(cfg, [9.0])
    assert any(e.kind == "inflow" and e.time == pytest.approx(5.0) for e in traj.events)
    check_invariants(traj)
    flat = MissionConfig(10.0, 2.0, 3.0, 10.0,
                         tuple(SamplePoint(p.alpha, 0.1, 1.0) for p in pts))
    assert traj.cost > simulate(flat, [9.0]).cost


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_euler_oracle_property(seed):
    cfg, sched = random_case(seed)
    J = simulate(cfg, sched).cost
    assert J == pytest.approx(euler_cost(cfg, sched.theta, dt=1e-4), rel=1e-3)
