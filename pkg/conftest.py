"""Shared fixtures for the merge toolkit tests."""
import numpy as np
import pytest

from merger.core.kinematics import Lane, Trajectory
from merger.core.planner import MergeSpec, Sequence
from merger.core.scenario import (GeneratorConfig, VehiclePair, Zone, baseline_gap,
                                  constant_speed_trajectory, generate_synthetic)

DT = 0.04


@pytest.fixture(scope="session")
def synthetic_pairs():
    return generate_synthetic(GeneratorConfig(n_pairs=10, seed=7))


@pytest.fixture
def make_pair():
    """Constant-speed pair with the on-ramp vehicle reaching ``p_merge`` at ``t_mer``."""
    def _make(p_merge=250.0, t_mer=10.0, v_m=25.0, p_m0=-47.5, sequence=Sequence.ONRAMP_LEADS,
              pair_id="pair-000"):
        n = int(round(t_mer / DT))
        onramp = constant_speed_trajectory(f"{pair_id}-r", Lane.ONRAMP, 0.0, p_merge / t_mer, n, DT)
        mainline = constant_speed_trajectory(f"{pair_id}-m", Lane.MAINLINE, p_m0, v_m, n, DT)
        spec = MergeSpec(t_mer=t_mer, p_merge=p_merge, sequence=sequence)
        return VehiclePair(pair_id, onramp, mainline, spec, Zone.ONE_THIRD,
                           baseline_gap(onramp, mainline, spec))
    return _make


def constant_accel_trajectory(v0=10.0, a=1.0, duration=10.0, dt=DT, p0=0.0, vehicle_id="veh"):
    n = int(round(duration / dt))
    t = np.round(np.arange(n + 1) * dt, 9)
    return Trajectory(vehicle_id=vehicle_id, lane=Lane.MAINLINE, t=t,
                      p=p0 + v0 * t + 0.5 * a * t ** 2, v=v0 + a * t, a=np.full(n + 1, a), dt=dt)
