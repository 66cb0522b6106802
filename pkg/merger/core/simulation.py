"""Case runner and batch manager.

Every run starts at the on-ramp vehicle's Start Line crossing (t = 0) and
stops at the merging time. Human-driven vehicles replay their baseline
trajectories; connected vehicles replay theirs until the controller takes
over.
"""
import logging
import multiprocessing as mp
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from ..config.settings import MERGE_SETTINGS, SIMULATION_SETTINGS
from ..utils.interrupts import check_interrupt
from .control import ControlLaw, energy_cost, propagate, rollout
from .errors import DegenerateSpeed, HorizonTooShort, InvalidConfig, MergeError, NeverResolved
from .kinematics import Lane, Trajectory, VehicleState, grid_index, grid_time, step
from .metrics import FuelCoefficients, PairMetrics, aggregate, evaluate_pair
from .planner import (CooperationMode, MergeCheck, check_merge_constraints,
                      plan_cooperative, recursive_law)
from .scenario import VehiclePair
from .vis import (IdentificationState, Verdict, VerdictEvent, VisConfig, VisMode,
                  identification_done_time, observe, scene_positions, track_id_for,
                  msg_id_for, update)

logger = logging.getLogger(__name__)


class CaseKind(str, Enum):
    BASELINE = 'baseline'
    CASE1_CAV_THV = 'case1'
    CASE2_CAV_CAV_VIS = 'case2'
    CASE3_CAV_CAV_NO_VIS = 'case3'


class EventKind(str, Enum):
    SL_CROSS = 'SLCross'
    IDENTIFICATION_DONE = 'IdentificationDone'
    COOPERATION_START = 'CooperationStart'
    RECURSIVE_START = 'RecursiveControlStart'
    MERGE = 'Merge'


class Advance(str, Enum):
    EXACT = 'exact'
    ZOH = 'zoh'


# Run flags
CLAMPED_SPEED = 'clamped_speed'
INSUFFICIENT_HORIZON = 'insufficient_horizon'
ACCEL_BOUND_EXCEEDED = 'accel_bound_exceeded'
HELD_COMMAND = 'held_command'
MISIDENTIFIED = 'misidentified'


@dataclass(frozen=True)
class SimConfig:
    vis: VisConfig = field(default_factory=VisConfig)
    mode: CooperationMode = CooperationMode(MERGE_SETTINGS['mode'])
    dt: float = SIMULATION_SETTINGS['dt']
    t_min: float = SIMULATION_SETTINGS['t_min']
    accel_bound: float = SIMULATION_SETTINGS['accel_bound']
    advance: Advance = Advance(SIMULATION_SETTINGS['advance'])
    seed: int = SIMULATION_SETTINGS['seed']
    eps_v: float = MERGE_SETTINGS['eps_v']
    eps_g: float = MERGE_SETTINGS['eps_g']

    def __post_init__(self):
        object.__setattr__(self, 'mode', CooperationMode(self.mode))
        object.__setattr__(self, 'advance', Advance(self.advance))
        if self.dt <= 0 or self.t_min <= 0:
            raise InvalidConfig("dt and t_min must be positive")
        if abs(self.vis.dt - self.dt) > 1e-12:
            raise InvalidConfig(f"VIS step {self.vis.dt} differs from simulation step {self.dt}")


@dataclass(frozen=True)
class SimEvent:
    t: float
    kind: EventKind
    detail: str = ''

    def to_dict(self) -> dict:
        record = {'t': round(self.t, 6), 'event': self.kind.value}
        if self.detail:
            record['detail'] = self.detail
        return record


@dataclass(eq=False)
class SimOutput:
    pair_id: str
    case: CaseKind
    spec: object
    onramp: Trajectory
    mainline: Trajectory
    events: List[SimEvent]
    flags: Tuple[str, ...] = ()
    energy_onramp: float = 0.0
    energy_mainline: float = 0.0
    verdicts: List[VerdictEvent] = field(default_factory=list)
    merge_check: Optional[MergeCheck] = None

    def event_time(self, kind: EventKind) -> Optional[float]:
        for event in self.events:
            if event.kind is EventKind(kind):
                return event.t
        return None

    def metrics(self, coeffs: FuelCoefficients = FuelCoefficients()) -> PairMetrics:
        return evaluate_pair(self.pair_id, self.onramp, self.mainline, self.spec, coeffs,
                             self.energy_onramp, self.energy_mainline)


@dataclass(frozen=True)
class RunFailure:
    pair_id: str
    case: CaseKind
    error: str


@dataclass
class BatchResult:
    outputs: List[SimOutput] = field(default_factory=list)
    failures: List[RunFailure] = field(default_factory=list)

    def for_case(self, case) -> List[SimOutput]:
        case = CaseKind(case)
        return [out for out in self.outputs if out.case is case]

    def metrics(self, coeffs: FuelCoefficients = FuelCoefficients()) -> Dict[CaseKind, List[PairMetrics]]:
        by_case: Dict[CaseKind, List[PairMetrics]] = {}
        for out in self.outputs:
            by_case.setdefault(out.case, []).append(out.metrics(coeffs))
        return by_case


class _Recorder:
    """Accumulates samples of one vehicle, replaying the baseline up to a start index."""

    def __init__(self, baseline: Trajectory, k_start: int):
        self.baseline = baseline
        self.states = list(baseline)[:k_start]
        self.clamped = False
        self.energy = _replay_energy(baseline, min(k_start, len(baseline) - 1))

    def replay_all(self):
        self.states = list(self.baseline)
        self.clamped = False
        self.energy = _replay_energy(self.baseline, len(self.baseline) - 1)

    def extend(self, traj: Trajectory):
        self.states.extend(traj)
        self.clamped = self.clamped or traj.clamped

    def trajectory(self) -> Trajectory:
        out = Trajectory.from_states(self.states, self.baseline.vehicle_id, self.baseline.lane,
                                     self.baseline.dt)
        out.clamped = out.clamped or self.clamped
        return out


def _replay_energy(traj: Trajectory, k_end: int) -> float:
    return float(0.5 * np.sum(traj.a[:k_end] ** 2) * traj.dt)


def pair_rng(seed: int, pair_id: str) -> np.random.Generator:
    """RNG keyed by (seed, pair_id) only, so results do not depend on run order."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(pair_id.encode('utf-8'))]))


def _identify(pair: VehiclePair, cfg: SimConfig, target_is_cav: bool,
              rng: np.random.Generator) -> Tuple[Optional[float], IdentificationState]:
    """Run VIS along the baseline until the conflicting vehicle gets a verdict."""
    onramp, mainline = pair.onramp, pair.mainline
    target = mainline.vehicle_id
    track = track_id_for(target)
    state = IdentificationState()
    for k in range(len(onramp)):
        positions, flags = scene_positions(onramp.p[k], mainline.p[k], cfg.vis, target_is_cav,
                                           target_id=target)
        frame = observe(positions, flags, cfg.vis, rng, t=float(onramp.t[k]),
                        speeds=dict.fromkeys(positions, float(mainline.v[k])))
        update(state, frame, cfg.vis)
        if state.verdict(track) is not Verdict.PENDING:
            break
    try:
        return identification_done_time(state.log, track, t_limit=pair.t_mer), state
    except NeverResolved:
        return None, state


def _shift(law: ControlLaw, t: float) -> ControlLaw:
    """The same input profile re-anchored at ``t``."""
    return ControlLaw(law.alpha + law.beta * (t - law.t0), law.beta, t, law.tf)


def _recursive(pair: VehiclePair, cfg: SimConfig, k_start: int, rec: _Recorder,
               flags: set) -> None:
    """Recursive control of the on-ramp vehicle from sample ``k_start`` to the merge."""
    spec, dt = pair.spec, cfg.dt
    n = grid_index(spec.t_mer, dt)
    start = pair.onramp[k_start]
    state = VehicleState(start.t, start.p, start.v)
    if k_start >= n:
        raise HorizonTooShort(f"No control steps left at t={start.t:.2f}")
    law = None
    for k in range(k_start, n):
        t_s = grid_time(k, dt)
        if spec.t_mer - t_s >= cfg.t_min - 1e-9:
            law = recursive_law(state, pair.mainline[k], spec, t_s, cfg.t_min)
        elif law is None:
            raise HorizonTooShort(f"Only {spec.t_mer - t_s:.3f}s left at t={t_s:.2f}")
        else:
            flags.add(HELD_COMMAND)
            law = _shift(law, t_s)
        u = law.alpha
        if cfg.advance is Advance.EXACT:
            segment = ControlLaw(u, law.beta, t_s, grid_time(k + 1, dt))
            p, v, stopped = propagate(segment, segment.tf, state.p, state.v)
            nxt = VehicleState(segment.tf, p, v, clamped=stopped)
            rec.energy += energy_cost(segment)
            jerk = law.beta
        else:
            nxt = step(state, u, dt)
            nxt = replace(nxt, t=grid_time(k + 1, dt))
            rec.energy += 0.5 * u * u * dt
            jerk = 0.0
        rec.states.append(replace(state, a=u, j=jerk))
        rec.clamped = rec.clamped or nxt.clamped
        state = nxt
    rec.states.append(replace(state, a=law.alpha + law.beta * (spec.t_mer - law.t0)))


def _start_recursive(pair, cfg, k_start, rec, flags, events, reason=''):
    t_start = grid_time(k_start, cfg.dt)
    try:
        _recursive(pair, cfg, k_start, rec, flags)
    except HorizonTooShort:
        flags.add(INSUFFICIENT_HORIZON)
        logger.info("Pair %s: no horizon left for recursive control at t=%.2f, replaying baseline",
                    pair.pair_id, t_start)
        rec.replay_all()
        return
    events.append(SimEvent(t_start, EventKind.RECURSIVE_START, reason))


def _cooperate(pair: VehiclePair, cfg: SimConfig, k_start: int, on_rec: _Recorder,
               ml_rec: _Recorder, events: list) -> Optional[MergeCheck]:
    spec, dt = pair.spec, cfg.dt
    t_c = grid_time(k_start, dt)
    on0, ml0 = pair.onramp[k_start], pair.mainline[k_start]
    plan = plan_cooperative(on0, ml0, spec, cfg.mode, t_c, cfg.t_min, dt)
    on_traj = rollout(plan.law_onramp, on0.p, on0.v, dt, pair.onramp.vehicle_id, Lane.ONRAMP,
                      t_end=spec.t_mer)
    ml_traj = rollout(plan.law_mainline, ml0.p, ml0.v, dt, pair.mainline.vehicle_id, Lane.MAINLINE,
                      t_end=spec.t_mer)
    on_rec.extend(on_traj)
    ml_rec.extend(ml_traj)
    on_rec.energy += energy_cost(plan.law_onramp)
    ml_rec.energy += energy_cost(plan.law_mainline)
    events.append(SimEvent(t_c, EventKind.COOPERATION_START, cfg.mode.value))
    try:
        check = check_merge_constraints(on_traj.last, ml_traj.last, spec, cfg.eps_v, cfg.eps_g)
    except DegenerateSpeed as e:
        logger.warning("Pair %s: %s", pair.pair_id, e)
        return None
    if not check.ok:
        logger.warning("Pair %s: merge constraints not met (gap %.3fs)", pair.pair_id, check.gap_s)
    return check


def run_case(pair: VehiclePair, case, cfg: SimConfig = None,
             rng: Optional[np.random.Generator] = None) -> SimOutput:
    """Simulate one pair under one case."""
    case = CaseKind(case)
    cfg = cfg or SimConfig()
    rng = rng if rng is not None else pair_rng(cfg.seed, pair.pair_id)
    spec, dt = pair.spec, cfg.dt
    n = grid_index(spec.t_mer, dt)
    if len(pair.onramp) != n + 1 or len(pair.mainline) != n + 1:
        raise InvalidConfig(f"Pair {pair.pair_id} is not sampled on [0, t_mer] at dt={dt}")

    events = [SimEvent(0.0, EventKind.SL_CROSS)]
    flags = set()
    verdicts: List[VerdictEvent] = []
    check = None

    if case is CaseKind.BASELINE:
        on_rec, ml_rec = _Recorder(pair.onramp, n + 1), _Recorder(pair.mainline, n + 1)
    elif case is CaseKind.CASE3_CAV_CAV_NO_VIS:
        on_rec, ml_rec = _Recorder(pair.onramp, 0), _Recorder(pair.mainline, 0)
        try:
            check = _cooperate(pair, cfg, 0, on_rec, ml_rec, events)
        except HorizonTooShort:
            flags.add(INSUFFICIENT_HORIZON)
            ml_rec = _Recorder(pair.mainline, n + 1)
            _start_recursive(pair, cfg, 0, on_rec, flags, events, INSUFFICIENT_HORIZON)
    else:
        target_is_cav = case is CaseKind.CASE2_CAV_CAV_VIS
        t_id, vis_state = _identify(pair, cfg, target_is_cav, rng)
        verdicts = list(vis_state.log)
        if t_id is None or t_id > spec.t_mer - cfg.t_min + 1e-9:
            flags.add(INSUFFICIENT_HORIZON)
            logger.info("Pair %s: identification unresolved before the merge, replaying baseline",
                        pair.pair_id)
            on_rec, ml_rec = _Recorder(pair.onramp, n + 1), _Recorder(pair.mainline, n + 1)
            if t_id is not None:
                events.append(SimEvent(t_id, EventKind.IDENTIFICATION_DONE))
        else:
            k_id = grid_index(t_id, dt)
            events.append(SimEvent(t_id, EventKind.IDENTIFICATION_DONE,
                                   vis_state.verdict(track_id_for(pair.mainline.vehicle_id)).value))
            on_rec, ml_rec = _Recorder(pair.onramp, k_id), _Recorder(pair.mainline, n + 1)
            if _misidentified(pair, vis_state, target_is_cav):
                flags.add(MISIDENTIFIED)
                logger.info("Pair %s: conflicting vehicle misidentified, using recursive control",
                            pair.pair_id)
            if case is CaseKind.CASE1_CAV_THV or MISIDENTIFIED in flags:
                _start_recursive(pair, cfg, k_id, on_rec, flags, events,
                                 MISIDENTIFIED if MISIDENTIFIED in flags else '')
            else:
                ml_rec = _Recorder(pair.mainline, k_id)
                try:
                    check = _cooperate(pair, cfg, k_id, on_rec, ml_rec, events)
                except HorizonTooShort:
                    flags.add(INSUFFICIENT_HORIZON)
                    logger.info("Pair %s: cooperative horizon too short at t=%.2f, falling back",
                                pair.pair_id, t_id)
                    on_rec, ml_rec = _Recorder(pair.onramp, k_id), _Recorder(pair.mainline, n + 1)
                    _start_recursive(pair, cfg, k_id, on_rec, flags, events, INSUFFICIENT_HORIZON)

    events.append(SimEvent(spec.t_mer, EventKind.MERGE))
    events.sort(key=lambda e: e.t)
    onramp, mainline = on_rec.trajectory(), ml_rec.trajectory()
    if onramp.clamped or mainline.clamped:
        flags.add(CLAMPED_SPEED)
        logger.info("Pair %s (%s): speed clamped at zero", pair.pair_id, case.value)
    if max(np.max(np.abs(onramp.a)), np.max(np.abs(mainline.a))) > cfg.accel_bound:
        flags.add(ACCEL_BOUND_EXCEEDED)
    return SimOutput(
        pair_id=pair.pair_id,
        case=case,
        spec=spec,
        onramp=onramp,
        mainline=mainline,
        events=events,
        flags=tuple(sorted(flags)),
        energy_onramp=on_rec.energy,
        energy_mainline=ml_rec.energy,
        verdicts=verdicts,
        merge_check=check,
    )


def _misidentified(pair: VehiclePair, state: IdentificationState, target_is_cav: bool) -> bool:
    track = track_id_for(pair.mainline.vehicle_id)
    verdict = state.verdict(track)
    if not target_is_cav:
        return verdict is Verdict.IDENTIFIED_CAV
    return (verdict is not Verdict.IDENTIFIED_CAV
            or state.identified.get(track) != msg_id_for(pair.mainline.vehicle_id))


def _run_task(task):
    pair, case, cfg = task
    try:
        return run_case(pair, case, cfg), None
    except (MergeError, ValueError) as e:
        return None, RunFailure(pair.pair_id, CaseKind(case), str(e))


def run_batch(pairs: Sequence[VehiclePair], cases: Sequence, cfg: SimConfig = None,
              jobs: int = 1, progress: bool = False) -> BatchResult:
    """Run every (pair, case) combination.

    Outputs are ordered by pair_id, then by the given case order, whatever
    the number of worker processes.
    """
    cfg = cfg or SimConfig()
    cases = [CaseKind(c) for c in cases]
    if not cases:
        raise InvalidConfig("At least one case must be selected")
    if not pairs:
        raise InvalidConfig("No pairs to run")
    tasks = [(pair, case, cfg) for pair in sorted(pairs, key=lambda p: p.pair_id) for case in cases]

    result = BatchResult()
    bar = tqdm(total=len(tasks), desc="Simulating", unit="runs", disable=not progress)
    try:
        if jobs > 1:
            with mp.Pool(processes=jobs) as pool:
                # imap keeps task order
                for output, failure in pool.imap(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                    check_interrupt()
                    _collect(result, output, failure)
                    bar.update(1)
        else:
            for task in tasks:
                check_interrupt()
                _collect(result, *_run_task(task))
                bar.update(1)
    finally:
        bar.close()
    logger.info("Finished %d run(s), %d failure(s)", len(result.outputs), len(result.failures))
    return result


def _collect(result: BatchResult, output, failure):
    if failure is not None:
        logger.warning("Run %s/%s failed: %s", failure.pair_id, failure.case.value, failure.error)
        result.failures.append(failure)
    else:
        result.outputs.append(output)


def sweep_identification_time(pairs: Sequence[VehiclePair], t_ids: Sequence[float],
                              cfg: SimConfig = None, jobs: int = 1,
                              coeffs: FuelCoefficients = FuelCoefficients()) -> Dict[float, Dict[str, float]]:
    """Case 2 aggregates for each fixed identification delay in ``t_ids``."""
    cfg = cfg or SimConfig()
    sweep = {}
    for t_id in t_ids:
        vis = replace(cfg.vis, mode=VisMode.FIXED, t_id=t_id)
        batch = run_batch(pairs, [CaseKind.CASE2_CAV_CAV_VIS], replace(cfg, vis=vis), jobs)
        summary = aggregate(out.metrics(coeffs) for out in batch.outputs)
        summary['fallbacks'] = float(sum(INSUFFICIENT_HORIZON in out.flags for out in batch.outputs))
        sweep[float(t_id)] = summary
        logger.info("t_id=%.2fs: %d run(s), %d fallback(s)", t_id, len(batch.outputs),
                    int(summary.get('fallbacks', 0)))
    return sweep
