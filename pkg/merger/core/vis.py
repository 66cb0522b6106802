"""Connected-vehicle identification: match radar tracks to V2V message streams.

Each sample compares the GPS-derived relative position carried by a message
with a radar track in the ego frame (x longitudinal, y lateral). For a true
pair the squared difference over the combined variance follows a chi-square
distribution with two degrees of freedom.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config.settings import SIMULATION_SETTINGS, VIS_SETTINGS
from .errors import InvalidConfig, NeverResolved

logger = logging.getLogger(__name__)

Position = Tuple[float, float]


class VisMode(str, Enum):
    FIXED = 'fixed'
    STATISTICAL = 'statistical'


class Verdict(str, Enum):
    PENDING = 'pending'
    IDENTIFIED_CAV = 'identified_cav'
    REJECTED_THV = 'rejected_thv'


@dataclass(frozen=True)
class VisConfig:
    sigma_g: float = VIS_SETTINGS['sigma_g']
    sigma_r: float = VIS_SETTINGS['sigma_r']
    alpha: float = VIS_SETTINGS['alpha']
    mode: VisMode = VisMode(VIS_SETTINGS['mode'])
    t_id: float = VIS_SETTINGS['t_id']
    window_n: int = VIS_SETTINGS['window_n']
    min_matches: int = VIS_SETTINGS['min_matches']
    seed: int = SIMULATION_SETTINGS['seed']
    radar_range: float = VIS_SETTINGS['radar_range']
    lane_offset: float = VIS_SETTINGS['lane_offset']
    distractor_offsets: Tuple[float, ...] = tuple(VIS_SETTINGS['distractor_offsets'])
    dt: float = SIMULATION_SETTINGS['dt']

    def __post_init__(self):
        object.__setattr__(self, 'mode', VisMode(self.mode))
        object.__setattr__(self, 'distractor_offsets', tuple(self.distractor_offsets))
        if self.sigma_g <= 0 or self.sigma_r <= 0:
            raise InvalidConfig("sigma_g and sigma_r must be positive")
        if not 0 < self.alpha < 1:
            raise InvalidConfig(f"alpha must be in (0, 1), got {self.alpha}")
        if self.mode is VisMode.STATISTICAL and not 0 < self.min_matches <= self.window_n:
            raise InvalidConfig("Statistical mode needs 0 < min_matches <= window_n")
        if self.mode is VisMode.FIXED and self.t_id < 0:
            raise InvalidConfig("t_id must be non-negative")

    @property
    def sigma2(self) -> float:
        return self.sigma_g ** 2 + self.sigma_r ** 2


@dataclass(frozen=True)
class BsmObservation:
    rel_x: float
    rel_y: float
    speed: float = 0.0

    @property
    def position(self) -> Position:
        return self.rel_x, self.rel_y


@dataclass
class SensorFrame:
    t: float
    radar_tracks: Dict[str, Position] = field(default_factory=dict)
    bsm_obs: Dict[str, BsmObservation] = field(default_factory=dict)
    # Ground truth: sensor id -> vehicle id. Only the fixed-delay mode reads it.
    truth: Dict[str, str] = field(default_factory=dict)


@dataclass
class PairCount:
    sample_count: int = 0
    match_count: int = 0


@dataclass(frozen=True)
class VerdictEvent:
    t: float
    track_id: str
    verdict: Verdict
    msg_id: Optional[str] = None
    # speed reported in the matched message
    reported_speed: Optional[float] = None

    def to_dict(self) -> dict:
        record = {'t': round(self.t, 6), 'track_id': self.track_id, 'verdict': self.verdict.value}
        if self.msg_id is not None:
            record['msg_id'] = self.msg_id
        if self.reported_speed is not None:
            record['reported_speed'] = round(self.reported_speed, 6)
        return record


@dataclass
class IdentificationState:
    """Matching progress for one simulation run; updated in place."""
    pair_counts: Dict[Tuple[str, str], PairCount] = field(default_factory=lambda: defaultdict(PairCount))
    track_samples: Dict[str, int] = field(default_factory=lambda: defaultdict(int))
    verdicts: Dict[str, Verdict] = field(default_factory=dict)
    identified: Dict[str, str] = field(default_factory=dict)   # track_id -> msg_id
    log: List[VerdictEvent] = field(default_factory=list)
    t_start: Optional[float] = None

    def verdict(self, track_id: str) -> Verdict:
        return self.verdicts.get(track_id, Verdict.PENDING)

    def _resolve(self, t: float, track_id: str, verdict: Verdict,
                 bsm: Optional[Tuple[str, BsmObservation]] = None):
        self.verdicts[track_id] = verdict
        msg_id, speed = (bsm[0], bsm[1].speed) if bsm is not None else (None, None)
        if msg_id is not None:
            self.identified[track_id] = msg_id
        self.log.append(VerdictEvent(t, track_id, verdict, msg_id, speed))
        logger.debug("t=%.2f %s -> %s %s", t, track_id, verdict.value, msg_id or '')


def chi2_threshold(alpha: float) -> float:
    """1 - alpha quantile of chi-square with two degrees of freedom."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return -2.0 * math.log(alpha)


def match_statistic(gps: Position, radar: Position, cfg: VisConfig) -> float:
    dx = gps[0] - radar[0]
    dy = gps[1] - radar[1]
    return (dx * dx + dy * dy) / cfg.sigma2


def match_sample(gps: Position, radar: Position, cfg: VisConfig) -> bool:
    return match_statistic(gps, radar, cfg) < chi2_threshold(cfg.alpha)


def track_id_for(vehicle_id: str) -> str:
    return f"trk-{vehicle_id}"


def msg_id_for(vehicle_id: str) -> str:
    return f"msg-{vehicle_id}"


def observe(true_rel_positions: Mapping[str, Position], is_cav: Mapping[str, bool],
            cfg: VisConfig, rng: np.random.Generator, t: float = 0.0,
            speeds: Optional[Mapping[str, float]] = None) -> SensorFrame:
    """Noisy radar tracks for visible vehicles and GPS-based messages from CAVs.

    Radar sees nothing before the ego vehicle passes the Start Line (t < 0)
    or beyond ``radar_range``; messages are received regardless.
    """
    frame = SensorFrame(t=t)
    for vehicle_id in sorted(true_rel_positions):
        x, y = true_rel_positions[vehicle_id]
        if t >= 0 and math.hypot(x, y) <= cfg.radar_range:
            ex, ey = rng.normal(0.0, cfg.sigma_r, size=2)
            track = track_id_for(vehicle_id)
            frame.radar_tracks[track] = (x + ex, y + ey)
            frame.truth[track] = vehicle_id
        if is_cav.get(vehicle_id, False):
            ex, ey = rng.normal(0.0, cfg.sigma_g, size=2)
            msg = msg_id_for(vehicle_id)
            speed = speeds.get(vehicle_id, 0.0) if speeds else 0.0
            frame.bsm_obs[msg] = BsmObservation(x + ex, y + ey, speed)
            frame.truth[msg] = vehicle_id
    return frame


def update(state: IdentificationState, frame: SensorFrame, cfg: VisConfig) -> IdentificationState:
    """Fold one sensor frame into the identification state."""
    if state.t_start is None:
        state.t_start = frame.t
    pending = [trk for trk in sorted(frame.radar_tracks) if state.verdict(trk) is Verdict.PENDING]

    if cfg.mode is VisMode.FIXED:
        if frame.t - state.t_start >= cfg.t_id - 1e-9:
            msg_of_vehicle = {veh: sid for sid, veh in frame.truth.items() if sid in frame.bsm_obs}
            for trk in pending:
                msg = msg_of_vehicle.get(frame.truth.get(trk))
                if msg is not None:
                    state._resolve(frame.t, trk, Verdict.IDENTIFIED_CAV, (msg, frame.bsm_obs[msg]))
                else:
                    state._resolve(frame.t, trk, Verdict.REJECTED_THV)
        return state

    taken = set(state.identified.values())
    free_msgs = [msg for msg in sorted(frame.bsm_obs) if msg not in taken]
    for trk in pending:
        state.track_samples[trk] += 1
        radar = frame.radar_tracks[trk]
        for msg in free_msgs:
            counts = state.pair_counts[(trk, msg)]
            counts.sample_count += 1
            if match_sample(frame.bsm_obs[msg].position, radar, cfg):
                counts.match_count += 1

    def qualifies(trk, msg):
        counts = state.pair_counts.get((trk, msg))
        return (counts is not None and counts.sample_count >= cfg.window_n
                and counts.match_count >= cfg.min_matches)

    closing = [trk for trk in pending if state.track_samples[trk] >= cfg.window_n]
    t_verdict = frame.t + cfg.dt
    decisions = {}
    for trk in closing:
        candidates = [msg for msg in free_msgs if qualifies(trk, msg)]
        if not candidates:
            decisions[trk] = (Verdict.REJECTED_THV, None)
        elif len(candidates) == 1:
            msg = candidates[0]
            rivals = [other for other in pending if other != trk and qualifies(other, msg)]
            decisions[trk] = (Verdict.IDENTIFIED_CAV, msg) if not rivals else (Verdict.PENDING, None)
        else:
            decisions[trk] = (Verdict.PENDING, None)

    for trk, (verdict, msg) in decisions.items():
        if verdict is Verdict.PENDING:
            # Ambiguous: start a fresh evidence window for this track
            state.track_samples[trk] = 0
            for key in [key for key in state.pair_counts if key[0] == trk]:
                state.pair_counts[key] = PairCount()
            logger.debug("t=%.2f %s ambiguous, extending identification", frame.t, trk)
        else:
            state._resolve(t_verdict, trk, verdict, (msg, frame.bsm_obs[msg]) if msg else None)
    return state


def identification_done_time(log: Sequence[VerdictEvent], track_id: str,
                             t_limit: Optional[float] = None) -> float:
    """Time of the first non-pending verdict for ``track_id``."""
    for event in log:
        if event.track_id == track_id and event.verdict is not Verdict.PENDING:
            if t_limit is not None and event.t > t_limit + 1e-9:
                break
            return event.t
    raise NeverResolved(f"{track_id} still pending" + (f" at t={t_limit:.2f}" if t_limit is not None else ""))


def scene_positions(ego_p: float, target_p: float, cfg: VisConfig, target_is_cav: bool,
                    target_id: str = 'target'):
    """Relative positions and CAV flags of the target and its distractors.

    Distractors drive in the mainline at fixed offsets from the target and
    alternate between CAV and THV.
    """
    positions = {target_id: (target_p - ego_p, cfg.lane_offset)}
    flags = {target_id: target_is_cav}
    for i, offset in enumerate(cfg.distractor_offsets):
        name = f"distractor-{i}"
        positions[name] = (target_p + offset - ego_p, cfg.lane_offset)
        flags[name] = i % 2 == 0
    return positions, flags
