"""Merge planning: recursive control against a human-driven mainline vehicle
and one-shot cooperative control between connected vehicles."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Tuple

from ..config.settings import MERGE_SETTINGS, SIMULATION_SETTINGS
from .control import BoundaryValueProblem, ControlLaw, solve_min_energy
from .errors import DegenerateSpeed, HorizonTooShort, InvalidConfig
from .kinematics import VehicleState

logger = logging.getLogger(__name__)

T_MIN = SIMULATION_SETTINGS['t_min']


class Sequence(str, Enum):
    MAINLINE_LEADS = 'mainline_leads'
    ONRAMP_LEADS = 'onramp_leads'


class CooperationMode(str, Enum):
    BILATERAL = 'bilateral'
    UNILATERAL = 'unilateral'


@dataclass(frozen=True)
class MergeSpec:
    t_mer: float
    p_merge: float
    sequence: Sequence
    h: float = MERGE_SETTINGS['h']
    l: float = MERGE_SETTINGS['l']

    def __post_init__(self):
        object.__setattr__(self, 'sequence', Sequence(self.sequence))
        if self.h <= 0 or self.l <= 0 or self.t_mer <= 0:
            raise InvalidConfig(f"Invalid merge spec: h={self.h}, l={self.l}, t_mer={self.t_mer}")


class CooperativePlan(NamedTuple):
    law_onramp: ControlLaw
    law_mainline: ControlLaw


@dataclass(frozen=True)
class MergeCheck:
    speed_ok: bool
    gap_s: float
    gap_ok: bool

    @property
    def ok(self) -> bool:
        return self.speed_ok and self.gap_ok


def _require_horizon(t_now: float, t_end: float, t_min: float):
    if t_end - t_now < t_min - 1e-9:
        raise HorizonTooShort(f"Only {t_end - t_now:.3f}s left before t={t_end:.3f}")


def terminal_target(spec: MergeSpec, mainline: VehicleState, t_now: float,
                    t_min: float = T_MIN) -> Tuple[float, float]:
    """On-ramp terminal (position, speed) under a constant-speed mainline prediction."""
    _require_horizon(t_now, spec.t_mer, t_min)
    vf = mainline.v
    predicted = mainline.p + mainline.v * (spec.t_mer - t_now)
    if spec.sequence is Sequence.MAINLINE_LEADS:
        pf = predicted - spec.l - spec.h * vf
    else:
        pf = max(spec.p_merge, predicted + spec.l + spec.h * vf)
    return pf, vf


def recursive_law(onramp: VehicleState, mainline_observed: VehicleState, spec: MergeSpec,
                  t_s: float, t_min: float = T_MIN) -> ControlLaw:
    """Law re-solved at ``t_s`` from the freshly observed mainline state."""
    pf, vf = terminal_target(spec, mainline_observed, t_s, t_min)
    bvp = BoundaryValueProblem(t0=t_s, tf=spec.t_mer, p0=onramp.p, v0=onramp.v, pf=pf, vf=vf)
    return solve_min_energy(bvp, t_min)


def recursive_step(onramp: VehicleState, mainline_observed: VehicleState, spec: MergeSpec,
                   t_s: float, t_min: float = T_MIN) -> float:
    """First control input of the recursive law; applied for one step only."""
    return recursive_law(onramp, mainline_observed, spec, t_s, t_min).alpha


def clearance_time(spec: MergeSpec, dt: float) -> float:
    """Grid time by which a leading mainline vehicle must clear the merging point."""
    steps = math.ceil(spec.h / dt - 1e-9)
    return round(spec.t_mer - steps * dt, 9)


def plan_cooperative(onramp: VehicleState, mainline: VehicleState, spec: MergeSpec,
                     mode: CooperationMode, t_c: float, t_min: float = T_MIN,
                     dt: float = SIMULATION_SETTINGS['dt']) -> CooperativePlan:
    """One-shot plan for both vehicles at cooperation start ``t_c``.

    In bilateral mode a leading mainline vehicle is planned to the point
    where its rear clears ``p_merge`` exactly ``h`` before the on-ramp
    vehicle arrives, and holds the shared terminal speed from there; its
    law therefore ends before ``t_mer``.
    """
    mode = CooperationMode(mode)
    _require_horizon(t_c, spec.t_mer, t_min)

    if mode is CooperationMode.UNILATERAL:
        pf, vf = terminal_target(spec, mainline, t_c, t_min)
        law_onramp = solve_min_energy(
            BoundaryValueProblem(t_c, spec.t_mer, onramp.p, onramp.v, pf, vf), t_min)
        return CooperativePlan(law_onramp, ControlLaw.zero(t_c, spec.t_mer))

    vf = mainline.v
    law_onramp = solve_min_energy(
        BoundaryValueProblem(t_c, spec.t_mer, onramp.p, onramp.v, spec.p_merge, vf), t_min)
    if spec.sequence is Sequence.ONRAMP_LEADS:
        pm = spec.p_merge - spec.l - spec.h * vf
        law_mainline = solve_min_energy(
            BoundaryValueProblem(t_c, spec.t_mer, mainline.p, mainline.v, pm, vf), t_min)
    else:
        t_clear = clearance_time(spec, dt)
        _require_horizon(t_c, t_clear, t_min)
        # Terminal position p_merge + l + h*vf after holding vf from t_clear
        pm = spec.p_merge + spec.l + spec.h * vf - (spec.t_mer - t_clear) * vf
        law_mainline = solve_min_energy(
            BoundaryValueProblem(t_c, t_clear, mainline.p, mainline.v, pm, vf), t_min)
    logger.debug("Cooperative plan at t=%.2f: onramp alpha=%.4f beta=%.4f, mainline alpha=%.4f beta=%.4f",
                 t_c, law_onramp.alpha, law_onramp.beta, law_mainline.alpha, law_mainline.beta)
    return CooperativePlan(law_onramp, law_mainline)


def lead_and_follow(onramp, mainline, sequence: Sequence):
    """Return (lead, follow) for the given merging sequence."""
    if Sequence(sequence) is Sequence.MAINLINE_LEADS:
        return mainline, onramp
    return onramp, mainline


def check_merge_constraints(onramp: VehicleState, mainline: VehicleState, spec: MergeSpec,
                            eps_v: float = MERGE_SETTINGS['eps_v'],
                            eps_g: float = MERGE_SETTINGS['eps_g'],
                            min_follower_speed: float = MERGE_SETTINGS['min_follower_speed']) -> MergeCheck:
    """Terminal speed match and time-gap policy at the merging time."""
    lead, follow = lead_and_follow(onramp, mainline, spec.sequence)
    if follow.v < min_follower_speed:
        raise DegenerateSpeed(f"Follower speed {follow.v:.3f} m/s is too low for a time gap")
    gap_s = (lead.p - follow.p - spec.l) / follow.v
    return MergeCheck(
        speed_ok=abs(onramp.v - mainline.v) <= eps_v,
        gap_s=gap_s,
        gap_ok=gap_s >= spec.h - eps_g,
    )
