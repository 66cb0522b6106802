"""Tests for safety, comfort and fuel measures and the significance tests."""
import numpy as np
import pytest

from conftest import constant_accel_trajectory
from merger.core.control import ControlLaw, rollout
from merger.core.errors import DegenerateSamples
from merger.core.kinematics import Lane, Trajectory
from merger.core.metrics import (FuelCoefficients, PairMetrics, a_rms, aggregate, evaluate_pair, fuel,
                                 fuel_rate, improvement_rates, merging_time_gap, welch_t_test)


def _single(v, a, dt=1.0):
    return Trajectory('veh', Lane.ONRAMP, t=[0.0], p=[0.0], v=[v], a=[a], dt=dt)


def test_merging_time_gap_example():
    follow = constant_accel_trajectory(v0=25.0, a=0.0, duration=8.0)
    lead = constant_accel_trajectory(v0=25.0, a=0.0, duration=8.0, p0=47.5)
    assert merging_time_gap(lead, follow, 100.0, 2.5) == pytest.approx(1.8)


def test_side_by_side_arrival_is_a_collision():
    onramp = constant_accel_trajectory(v0=20.0, a=0.0, duration=10.0)
    mainline = constant_accel_trajectory(v0=20.0, a=0.0, duration=10.0)
    assert merging_time_gap(onramp, mainline, 150.0, 2.5) <= 0.0


def test_a_rms():
    assert a_rms(constant_accel_trajectory(a=0.2)) == pytest.approx(0.2)
    alternating = Trajectory('veh', Lane.ONRAMP, t=np.arange(4) * 0.04, p=np.zeros(4),
                             v=np.full(4, 10.0), a=[1.0, -1.0, 1.0, -1.0])
    assert a_rms(alternating) == pytest.approx(1.0)
    traj = rollout(ControlLaw(1.6, -0.48, 0.0, 5.0), 0.0, 20.0, 0.001)
    assert a_rms(traj.before(5.0)) == pytest.approx(0.8, abs=1e-3)
    with pytest.raises(ValueError):
        a_rms(traj.before(0.0))


def test_a_rms_matches_sum_of_squares():
    traj = rollout(ControlLaw(1.0, -0.3, 0.0, 4.0), 0.0, 15.0, 0.04)
    assert a_rms(traj) ** 2 * len(traj) == pytest.approx(np.sum(traj.a ** 2))


def test_fuel_rate_examples():
    coeffs = FuelCoefficients()
    assert fuel(_single(20.0, 0.0), coeffs) == pytest.approx(0.8283, abs=1e-4)
    assert fuel(_single(20.0, 1.0), coeffs) == pytest.approx(3.2667, abs=1e-4)
    assert fuel(_single(20.0, -1.0), coeffs) == 0.0
    accel_only = FuelCoefficients(decel_rule='accel_only')
    assert fuel(_single(20.0, -1.0), accel_only) == pytest.approx(0.8283, abs=1e-4)


def test_fuel_rate_is_vectorised():
    rates = fuel_rate([20.0, 20.0, 20.0], [0.0, 1.0, -1.0])
    np.testing.assert_allclose(rates, [0.8283, 3.2667, 0.0], atol=1e-4)


def test_fuel_converges_to_integral():
    coeffs = FuelCoefficients()
    # v = 10 + t over ten seconds, so dt = dv
    poly = np.polynomial.Polynomial([coeffs.theta0 + coeffs.sig0, coeffs.theta1 + coeffs.sig1,
                                     coeffs.theta2 + coeffs.sig2, coeffs.theta3])
    exact = poly.integ()(20.0) - poly.integ()(10.0)
    coarse = fuel(constant_accel_trajectory(v0=10.0, a=1.0, duration=10.0, dt=0.04).before(10.0))
    fine = fuel(constant_accel_trajectory(v0=10.0, a=1.0, duration=10.0, dt=0.02).before(10.0))
    assert abs(fine - exact) < abs(coarse - exact)
    assert 2 * fine - coarse == pytest.approx(exact, abs=1e-3)


def test_evaluate_pair_matches_baseline_gap(synthetic_pairs):
    for pair in synthetic_pairs:
        m = evaluate_pair(pair.pair_id, pair.onramp, pair.mainline, pair.spec)
        assert m.gap_s == pytest.approx(pair.baseline_gap_s, abs=1e-9)
        assert m.arms_onramp == 0.0
        assert m.sequence == pair.sequence.value


def test_aggregate_and_collisions():
    metrics = [PairMetrics('b', -0.1, 1.0, 0.0, 10.0, 20.0),
               PairMetrics('a', 1.0, 3.0, 0.0, 30.0, 20.0)]
    summary = aggregate(metrics)
    assert summary['gap_s'] == pytest.approx(0.45)
    assert summary['arms_onramp'] == pytest.approx(2.0)
    assert summary['collisions'] == 1.0
    assert summary['n'] == 2.0
    assert aggregate([]) == {}


def test_improvement_rates():
    rates = improvement_rates({'gap_s': 1.0, 'arms_onramp': 1.0, 'fuel_onramp': 0.0},
                              {'gap_s': 1.8, 'arms_onramp': 0.9, 'fuel_onramp': 5.0})
    assert rates['gap_s'] == pytest.approx(80.0)
    assert rates['arms_onramp'] == pytest.approx(10.0)
    assert rates['fuel_onramp'] is None
    assert improvement_rates({'arms_onramp': 2.0}, {'arms_onramp': 0.0})['arms_onramp'] == pytest.approx(100.0)


def test_welch_t_test():
    rng = np.random.default_rng(0)
    xs, ys = rng.normal(0.0, 1.0, 50), rng.normal(1.0, 1.0, 50)
    result = welch_t_test(xs, ys)
    assert result.significant_95
    assert result.t_stat < 0
    vx, vy = xs.var(ddof=1) / 50, ys.var(ddof=1) / 50
    assert result.dof == pytest.approx((vx + vy) ** 2 / (vx ** 2 / 49 + vy ** 2 / 49))

    same = welch_t_test(xs, xs)
    assert same.t_stat == pytest.approx(0.0)
    assert not same.significant_95
    assert welch_t_test([1.0, 1.0], [1.0, 1.0]).p_value == 1.0


def test_welch_t_test_degenerate():
    with pytest.raises(DegenerateSamples):
        welch_t_test([1.0], [1.0, 2.0])
    with pytest.raises(DegenerateSamples):
        welch_t_test([1.0, 1.0], [2.0, 2.0])
