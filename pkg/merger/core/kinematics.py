"""Longitudinal vehicle states and sampled trajectories.

Positions are front-bumper positions along the lane with the Start Line at
p = 0; a vehicle's rear is at p - l.
"""
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Iterator, Optional

import numpy as np

from .errors import NotReached, OutOfSpan

logger = logging.getLogger(__name__)

GRID_TOL = 1e-9


class Lane(str, Enum):
    MAINLINE = 'mainline'
    ONRAMP = 'onramp'


@dataclass(frozen=True)
class VehicleState:
    t: float
    p: float
    v: float
    a: float = 0.0
    # jerk held over the step that starts at this state
    j: float = 0.0
    clamped: bool = False


def grid_index(t: float, dt: float) -> int:
    """Index of the first grid point at or after ``t``."""
    return int(math.ceil(t / dt - GRID_TOL))


def grid_time(k: int, dt: float) -> float:
    return round(k * dt, 9)


def step(state: VehicleState, u: float, dt: float) -> VehicleState:
    """Advance a state by ``dt`` under constant acceleration ``u``.

    A vehicle that brakes to a standstill inside the step stays where it
    stopped; the returned state then carries ``clamped=True``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p = state.p + state.v * dt + 0.5 * u * dt * dt
    v = state.v + u * dt
    clamped = v < 0.0
    if clamped:
        tau = state.v / -u
        logger.debug("Vehicle stopped at t=%.2f", state.t + tau)
        p = state.p + state.v * tau + 0.5 * u * tau * tau
        v = 0.0
    return VehicleState(t=state.t + dt, p=p, v=v, a=u, clamped=clamped)


@dataclass(eq=False)
class Trajectory:
    """Uniformly sampled longitudinal trajectory of one vehicle.

    ``j`` holds the jerk over each step; controlled segments have an affine
    input, so their acceleration changes linearly between samples.
    """
    vehicle_id: str
    lane: Lane
    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: Optional[np.ndarray] = None
    dt: float = 0.04
    ingested: bool = False
    clamped: bool = False

    def __post_init__(self):
        self.lane = Lane(self.lane)
        self.t = np.asarray(self.t, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = len(self.t)
        self.j = np.zeros(n) if self.j is None else np.asarray(self.j, dtype=float)
        if not (len(self.p) == len(self.v) == len(self.a) == len(self.j) == n):
            raise ValueError("Trajectory columns must have equal length")

    @classmethod
    def from_states(cls, states: Iterable[VehicleState], vehicle_id: str, lane: Lane,
                    dt: float = 0.04) -> 'Trajectory':
        states = list(states)
        return cls(
            vehicle_id=vehicle_id,
            lane=lane,
            t=[s.t for s in states],
            p=[s.p for s in states],
            v=[s.v for s in states],
            a=[s.a for s in states],
            j=[s.j for s in states],
            dt=dt,
            clamped=any(s.clamped for s in states),
        )

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> VehicleState:
        return VehicleState(float(self.t[k]), float(self.p[k]), float(self.v[k]), float(self.a[k]),
                            float(self.j[k]))

    def __iter__(self) -> Iterator[VehicleState]:
        return (self[k] for k in range(len(self)))

    @property
    def last(self) -> VehicleState:
        return self[-1]

    def index_of(self, t: float) -> int:
        """Sample index of grid time ``t``."""
        k = int(round((t - self.t[0]) / self.dt))
        if k < 0 or k >= len(self) or abs(self.t[k] - t) > 1e-6:
            raise OutOfSpan(f"t={t:.6f} is not a sample time of {self.vehicle_id}")
        return k

    def before(self, t_end: float) -> 'Trajectory':
        """Samples strictly before ``t_end`` (the metric window of a run)."""
        mask = self.t < t_end - GRID_TOL
        return self._masked(mask)

    def _masked(self, mask) -> 'Trajectory':
        return replace(self, t=self.t[mask], p=self.p[mask], v=self.v[mask], a=self.a[mask],
                       j=self.j[mask])

    def consistency_residual(self):
        """Largest position and speed residual of the piecewise-cubic update.

        Each step follows p + v dt + a dt^2 / 2 + j dt^3 / 6; within a
        controlled segment that is the affine-input form
        p + v dt + (2 a_k + a_{k+1}) dt^2 / 6, v + (a_k + a_{k+1}) dt / 2.
        """
        if len(self) < 2:
            return 0.0, 0.0
        dt = np.diff(self.t)
        a, j = self.a[:-1], self.j[:-1]
        p_pred = self.p[:-1] + self.v[:-1] * dt + 0.5 * a * dt ** 2 + j * dt ** 3 / 6.0
        v_pred = self.v[:-1] + a * dt + 0.5 * j * dt ** 2
        return float(np.max(np.abs(self.p[1:] - p_pred))), float(np.max(np.abs(self.v[1:] - v_pred)))

    def is_consistent(self, tol: float = 1e-6) -> bool:
        dp, dv = self.consistency_residual()
        return dp <= tol and dv <= tol

    def is_uniform(self, tol: float = 1e-6) -> bool:
        return len(self) < 2 or bool(np.all(np.abs(np.diff(self.t) - self.dt) <= tol))


def crossing_time(traj: Trajectory, p_target: float, extrapolate: bool = False) -> float:
    """First time the trajectory reaches ``p_target``.

    Linear interpolation between the bracketing samples. With
    ``extrapolate`` the trajectory continues past its last sample at its
    last speed.
    """
    if len(traj) == 0:
        raise OutOfSpan("Empty trajectory")
    if p_target < traj.p[0] - GRID_TOL:
        raise OutOfSpan(f"{traj.vehicle_id} starts at p={traj.p[0]:.3f}, after p={p_target:.3f}")
    reached = np.nonzero(traj.p >= p_target)[0]
    if len(reached) == 0:
        v_last = float(traj.v[-1])
        if extrapolate and v_last > GRID_TOL:
            return float(traj.t[-1] + (p_target - traj.p[-1]) / v_last)
        raise NotReached(f"{traj.vehicle_id} never reaches p={p_target:.3f} (last p={traj.p[-1]:.3f})")
    k = int(reached[0])
    if k == 0:
        return float(traj.t[0])
    p0, p1 = traj.p[k - 1], traj.p[k]
    frac = (p_target - p0) / (p1 - p0)
    return float(traj.t[k - 1] + frac * (traj.t[k] - traj.t[k - 1]))


def resample_window(traj: Trajectory, t0: float, t1: float) -> Trajectory:
    """Sub-trajectory on [t0, t1] sampled on the Δt grid that starts at ``t0``.

    Samples between original grid points follow the piecewise-cubic motion
    of the source; ingested trajectories are interpolated
    linearly instead.
    """
    if not t0 < t1:
        raise OutOfSpan(f"Empty window [{t0}, {t1}]")
    if t0 < traj.t[0] - GRID_TOL or t1 > traj.t[-1] + GRID_TOL:
        raise OutOfSpan(
            f"Window [{t0:.3f}, {t1:.3f}] outside span [{traj.t[0]:.3f}, {traj.t[-1]:.3f}]")
    n = int(math.floor((t1 - t0) / traj.dt + GRID_TOL))
    times = np.array([round(t0 + k * traj.dt, 9) for k in range(n + 1)])
    times[-1] = min(times[-1], traj.t[-1])

    if traj.ingested:
        p = np.interp(times, traj.t, traj.p)
        v = np.interp(times, traj.t, traj.v)
        a = np.interp(times, traj.t, traj.a)
    else:
        idx = np.searchsorted(traj.t, times + GRID_TOL, side='right') - 1
        idx = np.clip(idx, 0, len(traj) - 1)
        tau = times - traj.t[idx]
        tau[np.abs(tau) < GRID_TOL] = 0.0
        j = traj.j[idx]
        p = traj.p[idx] + traj.v[idx] * tau + 0.5 * traj.a[idx] * tau ** 2 + j * tau ** 3 / 6.0
        v = traj.v[idx] + traj.a[idx] * tau + 0.5 * j * tau ** 2
        a = traj.a[idx] + j * tau
        return replace(traj, t=times, p=p, v=v, a=a, j=j)
    return replace(traj, t=times, p=p, v=v, a=a, j=np.zeros(len(times)))
