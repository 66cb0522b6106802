"""Baseline dangerous merging pairs: canonical CSV ingestion, conflict
extraction, danger filtering and synthetic generation."""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..config.cases import MERGING_ZONES
from ..config.settings import DEFAULT_PATHS, GENERATOR_SETTINGS, MERGE_SETTINGS, SIMULATION_SETTINGS
from .errors import (EmptyFile, InvalidConfig, NoConflict, NotReached, OutOfSpan,
                     RejectionOverflow, SchemaError)
from .kinematics import Lane, Trajectory, crossing_time, resample_window
from .metrics import merging_time_gap
from .planner import MergeSpec, Sequence, lead_and_follow

logger = logging.getLogger(__name__)

CANONICAL_COLUMNS = ['frame', 'vehicle_id', 'lane', 't', 'p', 'v', 'a']
DT = SIMULATION_SETTINGS['dt']


class Zone(str, Enum):
    ONE_THIRD = 'one-third'
    TWO_THIRDS = 'two-thirds'

    @property
    def bounds(self) -> Tuple[float, float]:
        return MERGING_ZONES[self.value]

    def contains(self, p: float) -> bool:
        lo, hi = self.bounds
        if self is Zone.ONE_THIRD:
            return lo <= p < hi
        return lo <= p <= hi


@dataclass(eq=False)
class VehiclePair:
    """Baseline on-ramp/mainline pair, the unit of evaluation."""
    pair_id: str
    onramp: Trajectory
    mainline: Trajectory
    spec: MergeSpec
    zone: Zone
    baseline_gap_s: float

    @property
    def collision(self) -> bool:
        return self.baseline_gap_s <= 0.0

    @property
    def t_mer(self) -> float:
        return self.spec.t_mer

    @property
    def p_merge(self) -> float:
        return self.spec.p_merge

    @property
    def sequence(self) -> Sequence:
        return self.spec.sequence


@dataclass(frozen=True)
class GeneratorConfig:
    n_pairs: int = GENERATOR_SETTINGS['n_pairs']
    zone: Zone = Zone(GENERATOR_SETTINGS['zone'])
    danger_threshold_s: float = GENERATOR_SETTINGS['danger_threshold_s']
    lead_fraction: float = GENERATOR_SETTINGS['lead_fraction']
    onramp_speed: Tuple[float, float] = GENERATOR_SETTINGS['onramp_speed']
    mainline_speed: Tuple[float, float] = GENERATOR_SETTINGS['mainline_speed']
    min_gap_s: float = GENERATOR_SETTINGS['min_gap_s']
    max_attempts: int = GENERATOR_SETTINGS['max_attempts']
    max_initial_offset: float = GENERATOR_SETTINGS['max_initial_offset']
    seed: int = GENERATOR_SETTINGS['seed']
    h: float = MERGE_SETTINGS['h']
    l: float = MERGE_SETTINGS['l']
    dt: float = DT

    def __post_init__(self):
        object.__setattr__(self, 'zone', Zone(self.zone))
        object.__setattr__(self, 'onramp_speed', tuple(self.onramp_speed))
        object.__setattr__(self, 'mainline_speed', tuple(self.mainline_speed))
        if self.n_pairs < 1:
            raise InvalidConfig(f"n_pairs must be at least 1, got {self.n_pairs}")
        if not 0 <= self.lead_fraction <= 1:
            raise InvalidConfig(f"lead_fraction must be in [0, 1], got {self.lead_fraction}")
        if self.danger_threshold_s <= 0:
            raise InvalidConfig("danger_threshold_s must be positive")
        if not 0 <= self.min_gap_s < self.danger_threshold_s:
            raise InvalidConfig("min_gap_s must lie below danger_threshold_s")


@dataclass(eq=False)
class TrajectoryRecord:
    """An ingested vehicle with its per-sample lane labels."""
    trajectory: Trajectory
    lanes: np.ndarray
    frames: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    @property
    def vehicle_id(self) -> str:
        return self.trajectory.vehicle_id

    @property
    def starts_onramp(self) -> bool:
        return len(self.lanes) > 0 and self.lanes[0] == Lane.ONRAMP.value

    @property
    def mainline_only(self) -> bool:
        return bool(np.all(self.lanes == Lane.MAINLINE.value))

    def transition_index(self) -> Optional[int]:
        """First sample labelled mainline after starting on the ramp."""
        if not self.starts_onramp:
            return None
        hits = np.nonzero(self.lanes == Lane.MAINLINE.value)[0]
        return int(hits[0]) if len(hits) else None


def baseline_gap(onramp: Trajectory, mainline: Trajectory, spec: MergeSpec) -> float:
    lead, follow = lead_and_follow(onramp, mainline, spec.sequence)
    return merging_time_gap(lead, follow, spec.p_merge, spec.l)


def ingest_csv(path: Union[str, Path], dt: float = DT) -> List[TrajectoryRecord]:
    """Read a canonical trajectory CSV, one record per vehicle."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trajectory file not found: {path}")
    try:
        df = pd.read_csv(path, dtype={'vehicle_id': str, 'lane': str})
    except pd.errors.EmptyDataError:
        raise EmptyFile(f"{path} is empty")
    missing = [col for col in CANONICAL_COLUMNS if col not in df.columns]
    if missing:
        raise SchemaError(f"{path.name}: missing column(s) {', '.join(missing)}")
    if df.empty:
        raise EmptyFile(f"{path} has a header but no rows")
    bad_lanes = set(df['lane']) - {lane.value for lane in Lane}
    if bad_lanes:
        raise SchemaError(f"{path.name}: unknown lane label(s) {sorted(bad_lanes)}")

    records = []
    for vehicle_id, group in df.groupby('vehicle_id', sort=True):
        group = group.sort_values('t')
        t = group['t'].to_numpy(dtype=float)
        gaps = np.nonzero(np.abs(np.diff(t) - dt) > 1e-6)[0]
        if len(gaps):
            frame = group['frame'].to_numpy()[gaps[0] + 1]
            raise SchemaError(f"{path.name}: vehicle {vehicle_id} breaks the {dt}s spacing at frame {frame}")
        lanes = group['lane'].to_numpy(dtype=str)
        trajectory = Trajectory(
            vehicle_id=str(vehicle_id),
            lane=Lane(lanes[0]),
            t=t,
            p=group['p'].to_numpy(dtype=float),
            v=group['v'].to_numpy(dtype=float),
            a=group['a'].to_numpy(dtype=float),
            dt=dt,
            ingested=True,
        )
        records.append(TrajectoryRecord(trajectory, lanes, group['frame'].to_numpy(dtype=int)))
    logger.info("Ingested %d vehicle(s) from %s", len(records), path.name)
    return records


def write_tracks_csv(trajectories: Iterable[Trajectory], path: Union[str, Path],
                     merge_times: Optional[Dict[str, float]] = None) -> Path:
    """Write trajectories in the canonical schema.

    ``merge_times`` maps on-ramp vehicle ids to the time from which their
    samples are labelled mainline.
    """
    merge_times = merge_times or {}
    frames = []
    for traj in trajectories:
        lanes = np.full(len(traj), traj.lane.value, dtype=object)
        t_merge = merge_times.get(traj.vehicle_id)
        if t_merge is not None:
            lanes[traj.t >= t_merge - 1e-9] = Lane.MAINLINE.value
        frames.append(pd.DataFrame({
            'frame': np.rint(traj.t / traj.dt).astype(int),
            'vehicle_id': traj.vehicle_id,
            'lane': lanes,
            't': traj.t,
            'p': traj.p,
            'v': traj.v,
            'a': traj.a,
        }))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(path, index=False, float_format='%.6f',
                                                lineterminator='\n')
    return path


def _rebase(traj: Trajectory) -> Trajectory:
    """Shift a window so that it starts at t = 0."""
    return replace(traj, t=np.round(np.arange(len(traj)) * traj.dt, 9))


def extract_pairs(records: List[TrajectoryRecord], zone: Union[Zone, str],
                  h: float = MERGE_SETTINGS['h'], l: float = MERGE_SETTINGS['l'],
                  dt: float = DT) -> List[VehiclePair]:
    """Pair each on-ramp vehicle merging inside ``zone`` with its conflicting mainline vehicle.

    The conflicting vehicle is the mainline vehicle whose crossing of the
    merging position is nearest in time to the merge. Windows start at the
    on-ramp vehicle's Start Line crossing (t = 0) and end at the merge.
    """
    zone = Zone(zone)
    mainlines = [r for r in records if r.mainline_only]
    pairs = []
    for record in records:
        k = record.transition_index()
        if k is None:
            continue
        onramp = record.trajectory
        t_tr, p_tr = float(onramp.t[k]), float(onramp.p[k])
        if not zone.contains(p_tr):
            logger.debug("Vehicle %s merges at p=%.1f, outside %s", record.vehicle_id, p_tr, zone.value)
            continue
        try:
            pair = _pair_for(record, mainlines, t_tr, p_tr, zone, h, l, dt)
        except (NoConflict, OutOfSpan, NotReached) as e:
            logger.info("Skipping vehicle %s: %s", record.vehicle_id, e)
            continue
        if zone.contains(pair.p_merge):
            pairs.append(pair)
    logger.info("Extracted %d pair(s) in the %s zone", len(pairs), zone.value)
    return pairs


def _pair_for(record, mainlines, t_tr, p_tr, zone, h, l, dt) -> VehiclePair:
    onramp = record.trajectory
    best, best_dt, best_tc = None, math.inf, None
    for candidate in mainlines:
        try:
            tc = crossing_time(candidate.trajectory, p_tr)
        except (NotReached, OutOfSpan):
            continue
        if abs(tc - t_tr) < best_dt:
            best, best_dt, best_tc = candidate, abs(tc - t_tr), tc
    if best is None:
        raise NoConflict(f"no mainline vehicle crosses p={p_tr:.1f}")
    sequence = Sequence.ONRAMP_LEADS if best_tc > t_tr else Sequence.MAINLINE_LEADS

    t_sl = crossing_time(onramp, 0.0)
    n = int(math.floor((t_tr - t_sl) / dt + 1e-9))
    t_end = t_sl + n * dt
    on = _rebase(resample_window(onramp, t_sl, t_end))
    ml = _rebase(resample_window(best.trajectory, t_sl, t_end))
    spec = MergeSpec(t_mer=round(n * dt, 9), p_merge=float(on.p[-1]), sequence=sequence, h=h, l=l)
    return VehiclePair(
        pair_id=f"{zone.value}-{record.vehicle_id}",
        onramp=on,
        mainline=ml,
        spec=spec,
        zone=zone,
        baseline_gap_s=baseline_gap(on, ml, spec),
    )


def danger_filter(pairs: Iterable[VehiclePair], threshold_s: float) -> List[VehiclePair]:
    """Keep pairs whose baseline gap is below ``threshold_s`` (collisions included)."""
    kept = []
    for pair in pairs:
        if pair.baseline_gap_s < threshold_s:
            if pair.collision:
                logger.warning("Pair %s collides in the baseline (gap %.3fs)", pair.pair_id, pair.baseline_gap_s)
            kept.append(pair)
    return kept


def merge_time(p_merge: float, v0: float, dt: float = DT) -> float:
    """Constant-speed arrival time at ``p_merge``, snapped to the sampling grid."""
    return round(round(p_merge / v0 / dt) * dt, 9)


def constant_speed_trajectory(vehicle_id: str, lane: Lane, p0: float, v: float,
                              n_steps: int, dt: float = DT) -> Trajectory:
    k = np.arange(n_steps + 1)
    return Trajectory(
        vehicle_id=vehicle_id,
        lane=lane,
        t=np.round(k * dt, 9),
        p=p0 + v * k * dt,
        v=np.full(n_steps + 1, v),
        a=np.zeros(n_steps + 1),
        dt=dt,
    )


def _synthetic_pair(i: int, sequence: Sequence, cfg: GeneratorConfig,
                    rng: np.random.Generator) -> VehiclePair:
    lo, hi = cfg.zone.bounds
    for _ in range(cfg.max_attempts):
        p_merge = rng.uniform(lo, hi)
        v_r = rng.uniform(*cfg.onramp_speed)
        v_m = rng.uniform(*cfg.mainline_speed)
        gap = rng.uniform(cfg.min_gap_s, cfg.danger_threshold_s)
        if not cfg.zone.contains(p_merge):
            continue
        t_mer = merge_time(p_merge, v_r, cfg.dt)
        n_steps = int(round(t_mer / cfg.dt))
        v_r = p_merge / t_mer
        if not cfg.onramp_speed[0] <= v_r <= cfg.onramp_speed[1]:
            continue

        if sequence is Sequence.ONRAMP_LEADS:
            # Mainline front reaches p_merge `gap` after the on-ramp rear clears it
            t_cross = t_mer + cfg.l / v_r + gap
            p_m0 = p_merge - v_m * t_cross
        else:
            # Mainline rear clears p_merge `gap` before the on-ramp front arrives
            t_cross = t_mer - gap
            p_m0 = p_merge + cfg.l - v_m * t_cross
        if t_cross <= 0 or abs(p_m0) > cfg.max_initial_offset:
            continue

        pair_id = f"{cfg.zone.value}-{i:03d}"
        onramp = constant_speed_trajectory(f"{pair_id}-r", Lane.ONRAMP, 0.0, v_r, n_steps, cfg.dt)
        onramp.p[-1] = p_merge
        mainline = constant_speed_trajectory(f"{pair_id}-m", Lane.MAINLINE, p_m0, v_m, n_steps, cfg.dt)
        spec = MergeSpec(t_mer=t_mer, p_merge=p_merge, sequence=sequence, h=cfg.h, l=cfg.l)
        recomputed = baseline_gap(onramp, mainline, spec)
        if abs(recomputed - gap) > 0.05 or recomputed >= cfg.danger_threshold_s:
            continue
        return VehiclePair(pair_id, onramp, mainline, spec, cfg.zone, recomputed)
    raise RejectionOverflow(f"Pair {i}: no valid sample after {cfg.max_attempts} attempts")


def generate_synthetic(cfg: GeneratorConfig, progress: bool = False) -> List[VehiclePair]:
    """Reproducible constant-speed dangerous pairs for one zone."""
    rng = np.random.default_rng(cfg.seed)
    n_lead = int(round(cfg.lead_fraction * cfg.n_pairs))
    sequences = np.array([Sequence.ONRAMP_LEADS.value] * n_lead
                         + [Sequence.MAINLINE_LEADS.value] * (cfg.n_pairs - n_lead))
    sequences = rng.permutation(sequences)
    pairs = []
    for i in tqdm(range(cfg.n_pairs), desc=f"Generating {cfg.zone.value}", unit="pairs",
                  disable=not progress):
        pairs.append(_synthetic_pair(i, Sequence(sequences[i]), cfg, rng))
    logger.info("Generated %d pair(s) in the %s zone (%d on-ramp leading)",
                len(pairs), cfg.zone.value, n_lead)
    return pairs


def write_pair_manifest(pairs: List[VehiclePair], out_dir: Union[str, Path],
                        source: str = 'synthetic') -> Path:
    """Write one trajectory CSV per pair plus the JSON manifest."""
    out_dir = Path(out_dir)
    traj_dir = out_dir / DEFAULT_PATHS['trajectories']
    entries = []
    for pair in pairs:
        csv_path = traj_dir / f"{pair.pair_id}.csv"
        write_tracks_csv([pair.onramp, pair.mainline], csv_path, {pair.onramp.vehicle_id: pair.t_mer})
        entries.append({
            'pair_id': pair.pair_id,
            'zone': pair.zone.value,
            't_mer': round(pair.t_mer, 6),
            'p_merge': round(pair.p_merge, 6),
            'sequence': pair.sequence.value,
            'baseline_gap_s': round(pair.baseline_gap_s, 6),
            'h': pair.spec.h,
            'l': pair.spec.l,
            'onramp_id': pair.onramp.vehicle_id,
            'mainline_id': pair.mainline.vehicle_id,
            'source': source,
            'trajectories': csv_path.relative_to(out_dir).as_posix(),
        })
    manifest = out_dir / DEFAULT_PATHS['manifest']
    with open(manifest, 'w', encoding='utf-8') as f:
        json.dump({'pairs': entries}, f, indent=2)
        f.write('\n')
    return manifest


def load_pair_manifest(path: Union[str, Path], dt: float = DT) -> List[VehiclePair]:
    """Rebuild pairs from a manifest and its trajectory files."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        entries = json.load(f)['pairs']
    pairs = []
    for entry in entries:
        records = {r.vehicle_id: r.trajectory for r in ingest_csv(path.parent / entry['trajectories'], dt)}
        ingested = entry.get('source') == 'ingested'
        onramp = replace(records[entry['onramp_id']], lane=Lane.ONRAMP, ingested=ingested)
        mainline = replace(records[entry['mainline_id']], ingested=ingested)
        spec = MergeSpec(entry['t_mer'], entry['p_merge'], Sequence(entry['sequence']),
                         entry.get('h', MERGE_SETTINGS['h']), entry.get('l', MERGE_SETTINGS['l']))
        pairs.append(VehiclePair(entry['pair_id'], onramp, mainline, spec, Zone(entry['zone']),
                                 baseline_gap(onramp, mainline, spec)))
    return pairs
