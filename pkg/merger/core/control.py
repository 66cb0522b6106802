"""Minimum-energy fixed-endpoint control for the double integrator.

Minimizing the integral of u^2 / 2 subject to p' = v, v' = u with both
endpoints fixed gives a costate lambda_v that is linear in time, so the
optimal input is affine: u(t) = alpha + beta * (t - t0).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..config.settings import SIMULATION_SETTINGS
from .errors import HorizonTooShort, OutOfWindow
from .kinematics import GRID_TOL, Lane, Trajectory

logger = logging.getLogger(__name__)

WINDOW_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryValueProblem:
    t0: float
    tf: float
    p0: float
    v0: float
    pf: float
    vf: float

    @property
    def horizon(self) -> float:
        return self.tf - self.t0


@dataclass(frozen=True)
class ControlLaw:
    """Affine acceleration profile u(t) = alpha + beta * (t - t0) on [t0, tf]."""
    alpha: float
    beta: float
    t0: float
    tf: float

    @classmethod
    def zero(cls, t0: float, tf: float) -> 'ControlLaw':
        return cls(0.0, 0.0, t0, tf)

    @property
    def horizon(self) -> float:
        return self.tf - self.t0

    def state_at(self, t: float, p0: float, v0: float) -> Tuple[float, float]:
        """Closed-form position and speed at ``t`` starting from (p0, v0) at t0."""
        tau = t - self.t0
        p = p0 + v0 * tau + 0.5 * self.alpha * tau ** 2 + self.beta * tau ** 3 / 6.0
        v = v0 + self.alpha * tau + 0.5 * self.beta * tau ** 2
        return p, v


def solve_min_energy(bvp: BoundaryValueProblem,
                     t_min: float = SIMULATION_SETTINGS['t_min']) -> ControlLaw:
    """Solve the fixed-time, fixed-endpoint minimum-energy problem."""
    T = bvp.horizon
    if T < t_min - WINDOW_TOL:
        raise HorizonTooShort(f"Horizon {T:.3f}s is shorter than {t_min:.3f}s")
    if bvp.v0 < 0 or bvp.vf < 0:
        raise ValueError(f"Speeds must be non-negative (v0={bvp.v0}, vf={bvp.vf})")
    A = bvp.vf - bvp.v0
    B = bvp.pf - bvp.p0 - bvp.v0 * T
    beta = 6.0 * A / T ** 2 - 12.0 * B / T ** 3
    alpha = -2.0 * A / T + 6.0 * B / T ** 2
    return ControlLaw(alpha=alpha, beta=beta, t0=bvp.t0, tf=bvp.tf)


def stop_time(law: ControlLaw, v0: float, lo: float, hi: float) -> float:
    """First time after ``law.t0``, within [lo, hi], at which the speed reaches zero."""
    roots = np.roots([0.5 * law.beta, law.alpha, v0])
    roots = roots[np.isreal(roots)].real
    inside = roots[(roots >= lo - GRID_TOL) & (roots <= hi + GRID_TOL)]
    if len(inside) == 0:
        return lo
    return float(np.clip(inside.min(), lo, hi))


def propagate(law: ControlLaw, t: float, p0: float, v0: float) -> Tuple[float, float, bool]:
    """Position and speed at ``t`` under ``law``; the third value is True if the vehicle stopped.

    A vehicle whose speed reaches zero stays at its stopping point.
    """
    p, v = law.state_at(t, p0, v0)
    if v >= 0.0:
        return p, v, False
    tau = stop_time(law, v0, 0.0, t - law.t0)
    p, _ = law.state_at(law.t0 + tau, p0, v0)
    return p, 0.0, True


def eval_control(law: ControlLaw, t: float) -> float:
    if t < law.t0 - WINDOW_TOL or t > law.tf + WINDOW_TOL:
        raise OutOfWindow(f"t={t:.6f} outside [{law.t0:.6f}, {law.tf:.6f}]")
    return law.alpha + law.beta * (t - law.t0)


def energy_cost(law: ControlLaw) -> float:
    """Integral of u^2 / 2 over the law's window."""
    T = law.horizon
    a, b = law.alpha, law.beta
    return 0.5 * (a * a * T + a * b * T ** 2 + b * b * T ** 3 / 3.0)


def rollout(law: ControlLaw, p0: float, v0: float, dt: float,
            vehicle_id: str = '', lane: Lane = Lane.ONRAMP,
            t_end: Optional[float] = None) -> Trajectory:
    """Sample the closed-form motion under ``law`` on the Δt grid.

    Samples are evaluated from the cubic position and quadratic speed
    rather than accumulated, so terminal errors stay at floating-point
    level. Past ``law.tf`` (up to ``t_end``) the vehicle holds its
    terminal speed. A vehicle braked to a standstill stays stopped and the
    trajectory is marked ``clamped``.
    """
    t_end = law.tf if t_end is None else t_end
    n_law = law.horizon / dt
    n_total = (t_end - law.t0) / dt
    for n in (n_law, n_total):
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"dt={dt} does not divide the horizon ({n * dt:.6f}s)")
    if t_end < law.tf - WINDOW_TOL:
        raise ValueError("t_end must not precede the end of the law")
    n_law, n_total = int(round(n_law)), int(round(n_total))

    k = np.arange(n_total + 1)
    times = np.round(law.t0 + k * dt, 9)
    tau = np.minimum(k, n_law) * dt
    p = p0 + v0 * tau + 0.5 * law.alpha * tau ** 2 + law.beta * tau ** 3 / 6.0
    v = v0 + law.alpha * tau + 0.5 * law.beta * tau ** 2
    a = law.alpha + law.beta * tau
    j = np.where(k < n_law, law.beta, 0.0)

    reversing = np.nonzero(v[:n_law + 1] < -GRID_TOL)[0]
    clamped = len(reversing) > 0
    if clamped:
        k_stop = int(reversing[0])
        tau_stop = stop_time(law, v0, max(k_stop - 1, 0) * dt, k_stop * dt)
        p_stop, _ = law.state_at(law.t0 + tau_stop, p0, v0)
        logger.debug("Vehicle %s stopped at t=%.3f", vehicle_id, law.t0 + tau_stop)
        p[k_stop:], v[k_stop:], a[k_stop:], j[k_stop:] = p_stop, 0.0, 0.0, 0.0
    elif n_total > n_law:
        coast = k > n_law
        a[k >= n_law] = 0.0
        p[coast] = p[n_law] + v[n_law] * (k[coast] - n_law) * dt
    np.maximum(v, 0.0, out=v)
    return Trajectory(vehicle_id=vehicle_id, lane=lane, t=times, p=p, v=v, a=a, j=j, dt=dt,
                      clamped=clamped)
