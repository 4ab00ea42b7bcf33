import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from persmon.model import (ConfigError, MissionConfig, SamplePoint, SwitchingSchedule,
                           detection_probability, joint_detection_probability,
                           uncertainty_rate, uniform_config)


def test_uniform_grid_includes_endpoints(ex1):
    assert ex1.M == 21
    np.testing.assert_allclose(ex1.alphas, np.arange(21.0))


def test_detection_probability_values():
    assert detection_probability(5.0, 5.0, 4.0) == 1.0
    assert detection_probability(7.0, 5.0, 4.0) == pytest.approx(0.5)
    assert detection_probability(9.0, 5.0, 4.0) == 0.0
    assert detection_probability(12.0, 5.0, 4.0) == 0.0
    out = detection_probability(np.array([3.0, 5.0, 11.0]), 5.0, 4.0)
    np.testing.assert_allclose(out, [0.5, 1.0, 0.0])


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 20))
def test_detection_probability_range_and_symmetry(x, s, r):
    p = detection_probability(x, s, r)
    assert 0.0 <= p <= 1.0
    assert p == detection_probability(s, x, r)


def test_joint_probability():
    assert joint_detection_probability(0.0, [0.0, 10.0], 4.0) == 1.0
    assert joint_detection_probability(2.0, [0.0, 4.0], 4.0) == pytest.approx(0.75)
    assert joint_detection_probability(2.0, [0.0], 4.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        joint_detection_probability(1.0, [], 4.0)


@given(st.floats(0, 10), st.lists(st.floats(0, 10), min_size=1, max_size=4), st.floats(0.5, 5))
def test_joint_probability_dominates_each_agent(x, positions, r):
    pj = joint_detection_probability(x, positions, r)
    assert 0.0 <= pj <= 1.0 + 1e-12
    assert pj >= max(detection_probability(x, s, r) for s in positions) - 1e-12


def test_uncertainty_rate_cases():
    assert uncertainty_rate(0.0, 0.5, 0.01, 3.0) == 0.0
    assert uncertainty_rate(0.0, 0.0, 0.01, 3.0) == pytest.approx(0.01)
    assert uncertainty_rate(1.0, 0.5, 0.01, 3.0) == pytest.approx(0.01 - 1.5)
    # empty but the inflow wins: grows again
    assert uncertainty_rate(0.0, 0.001, 0.01, 3.0) == pytest.approx(0.01 - 0.003)
    with pytest.raises(ValueError):
        uncertainty_rate(-1e-3, 0.5, 0.01, 3.0)


@pytest.mark.parametrize("kwargs,code", [
    (dict(L=0.0), "nonpositive_parameter"),
    (dict(r=-1.0), "nonpositive_parameter"),
    (dict(T=math.nan), "non_finite"),
    (dict(points=()), "empty_points"),
    (dict(points=(SamplePoint(25.0, 0.1, 1.0),)), "alpha_out_of_range"),
    (dict(points=(SamplePoint(2.0, 3.0, 1.0),)), "inflow_not_below_B"),
    (dict(points=(SamplePoint(5.0, 0.1, 1.0), SamplePoint(2.0, 0.1, 1.0))), "unsorted_alphas"),
])
def test_config_validation(kwargs, code):
    base = dict(L=20.0, r=4.0, B=3.0, T=36.0, points=(SamplePoint(1.0, 0.1, 1.0),))
    base.update(kwargs)
    with pytest.raises(ConfigError) as err:
        MissionConfig(**base)
    assert err.value.code == code


def test_sample_point_validation():
    with pytest.raises(ConfigError, match="A must be"):
        SamplePoint(1.0, 0.0, 1.0)
    with pytest.raises(ConfigError) as err:
        SamplePoint(1.0, 0.1, -1.0)
    assert err.value.code == "negative_uncertainty"
    with pytest.raises(ConfigError) as err:
        SamplePoint(1.0, 0.1, 1.0, ((5.0, 0.2), (1.0, 0.3)))
    assert err.value.code == "unsorted_inflow"


def test_inflow_schedule():
    p = SamplePoint(1.0, 0.1, 0.0, ((2.0, 0.5), (4.0, 0.2)))
    assert [p.inflow_at(t) for t in (0.0, 2.0, 3.0, 4.5)] == [0.1, 0.5, 0.5, 0.2]
    assert p.max_inflow == 0.5
    cfg = MissionConfig(10.0, 2.0, 3.0, 10.0, (p,))
    assert cfg.time_varying
    np.testing.assert_array_equal(cfg.inflow_change_times(), [2.0, 4.0])


def test_schedule_feasibility():
    assert SwitchingSchedule((12.0,)).is_feasible(20.0)
    assert SwitchingSchedule((17.81, 1.29)).is_feasible(20.0)
    bad = SwitchingSchedule((12.0, 16.0, 4.0))
    assert not bad.is_feasible(20.0)
    assert len(bad.violations(20.0)) == 2
    with pytest.raises(ConfigError) as err:
        SwitchingSchedule((21.0,)).check(20.0)
    assert err.value.code == "infeasible_schedule"


def test_grouped_round_trip():
    s = SwitchingSchedule.from_grouped([95, 95, 95, 5, 5])
    assert s.theta == (95, 5, 95, 5, 95)
    assert s.grouped() == [95, 95, 95, 5, 5]
    assert SwitchingSchedule.from_grouped([12, 16, 4]).theta == (12, 4, 16)


def test_config_error_dict():
    err = ConfigError("missing_field", "no L", line=3)
    assert err.to_dict() == {"error": "missing_field", "message": "no L", "line": 3}
    assert uniform_config(10, 2, 3, 5, 1, 0.1, 1).alphas.tolist() == [5.0]
