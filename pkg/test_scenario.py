"""Tests for pair ingestion, extraction and synthetic generation."""
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from merger.core.errors import EmptyFile, InvalidConfig, SchemaError
from merger.core.kinematics import Lane, Trajectory
from merger.core.planner import Sequence
from merger.core.scenario import (GeneratorConfig, TrajectoryRecord, Zone, danger_filter, extract_pairs,
                                  generate_synthetic, ingest_csv, load_pair_manifest, merge_time,
                                  write_pair_manifest, write_tracks_csv)

DT = 0.04


def _record(vehicle_id, p0, v, duration=20.0, merge_at=None):
    t = np.round(np.arange(int(round(duration / DT)) + 1) * DT, 9)
    p = p0 + v * t
    if merge_at is None:
        lanes = np.full(len(t), Lane.MAINLINE.value)
    else:
        lanes = np.where(p >= merge_at, Lane.MAINLINE.value, Lane.ONRAMP.value)
    traj = Trajectory(vehicle_id, Lane(lanes[0]), t, p, np.full(len(t), v), np.zeros(len(t)),
                      dt=DT, ingested=True)
    return TrajectoryRecord(traj, lanes)


def test_zone_bounds():
    assert Zone.ONE_THIRD.contains(230.0)
    assert not Zone.ONE_THIRD.contains(300.0)
    assert Zone.TWO_THIRDS.contains(300.0)
    assert Zone.TWO_THIRDS.contains(370.0)
    assert not Zone('two-thirds').contains(229.0)


def test_merge_time():
    assert merge_time(250.0, 25.0) == pytest.approx(10.0)
    assert merge_time(250.0, 24.0) == pytest.approx(10.4)


def test_extract_pair_picks_nearest_mainline_vehicle():
    records = [
        _record('r1', -10.0, 20.0, duration=15.0, merge_at=260.0),
        # crosses p = 260.4 one second after the merge
        _record('m1', 260.4 - 25.0 * 14.52, 25.0),
        # crosses three seconds before
        _record('m2', 260.4 - 25.0 * 10.52, 25.0),
    ]
    pairs = extract_pairs(records, Zone.ONE_THIRD)
    assert len(pairs) == 1
    pair = pairs[0]
    assert pair.pair_id == 'one-third-r1'
    assert pair.mainline.vehicle_id == 'm1'
    assert pair.sequence is Sequence.ONRAMP_LEADS
    assert pair.t_mer == pytest.approx(13.0)
    assert pair.p_merge == pytest.approx(260.0, abs=1e-6)
    assert pair.onramp.t[0] == 0.0
    assert pair.onramp.p[0] == pytest.approx(0.0, abs=1e-6)
    assert len(pair.onramp) == len(pair.mainline) == 326
    assert pair.baseline_gap_s == pytest.approx(0.879, abs=1e-6)


def test_extract_skips_merges_outside_zone():
    records = [_record('r1', -10.0, 20.0, duration=15.0, merge_at=200.0),
               _record('m1', -100.0, 25.0)]
    assert extract_pairs(records, Zone.ONE_THIRD) == []


def test_danger_filter(synthetic_pairs):
    pair = synthetic_pairs[0]
    safe = replace(pair, pair_id='safe', baseline_gap_s=2.5)
    crash = replace(pair, pair_id='crash', baseline_gap_s=-0.1)
    kept = danger_filter([pair, safe, crash], 1.8)
    assert [p.pair_id for p in kept] == [pair.pair_id, 'crash']
    assert crash.collision


def test_generator_acceptance():
    pairs = generate_synthetic(GeneratorConfig(n_pairs=100, seed=7))
    assert len(pairs) == 100
    assert sum(p.sequence is Sequence.ONRAMP_LEADS for p in pairs) == 82
    assert len(danger_filter(pairs, 1.8)) == 100
    for pair in pairs:
        assert Zone.ONE_THIRD.contains(pair.p_merge)
        assert 0.0 < pair.baseline_gap_s < 1.8
        assert pair.onramp.p[-1] == pytest.approx(pair.p_merge)
        assert pair.onramp.t[-1] == pytest.approx(pair.t_mer)
        assert len(pair.onramp) == int(round(pair.t_mer / DT)) + 1


def test_generator_acceptance_two_thirds():
    pairs = generate_synthetic(GeneratorConfig(n_pairs=100, zone=Zone.TWO_THIRDS))
    assert len(pairs) == 100
    assert sum(p.sequence is Sequence.ONRAMP_LEADS for p in pairs) == 82
    lo, hi = Zone.TWO_THIRDS.bounds
    for pair in pairs:
        assert lo <= pair.p_merge <= hi
        assert 0.0 < pair.baseline_gap_s < 1.8


def test_generator_is_reproducible():
    cfg = GeneratorConfig(n_pairs=5, zone='two-thirds', seed=3)
    first, second = generate_synthetic(cfg), generate_synthetic(cfg)
    for a, b in zip(first, second):
        assert a.pair_id == b.pair_id
        np.testing.assert_array_equal(a.mainline.p, b.mainline.p)
        assert a.spec == b.spec
        assert Zone.TWO_THIRDS.contains(a.p_merge)


def test_generator_config_validation():
    with pytest.raises(InvalidConfig):
        GeneratorConfig(n_pairs=0)
    with pytest.raises(InvalidConfig):
        GeneratorConfig(lead_fraction=1.5)


def test_tracks_csv_round_trip(tmp_path, synthetic_pairs):
    pair = synthetic_pairs[0]
    path = write_tracks_csv([pair.onramp, pair.mainline], tmp_path / 'tracks.csv',
                            {pair.onramp.vehicle_id: pair.t_mer})
    records = {r.vehicle_id: r for r in ingest_csv(path)}
    onramp = records[pair.onramp.vehicle_id]
    np.testing.assert_allclose(onramp.trajectory.p, pair.onramp.p, atol=1e-6)
    assert onramp.starts_onramp
    assert onramp.transition_index() == len(pair.onramp) - 1
    assert records[pair.mainline.vehicle_id].mainline_only


def test_ingest_errors(tmp_path):
    missing = tmp_path / 'missing.csv'
    pd.DataFrame({'frame': [0], 'vehicle_id': ['a'], 't': [0.0]}).to_csv(missing, index=False)
    with pytest.raises(SchemaError, match='missing column'):
        ingest_csv(missing)

    empty = tmp_path / 'empty.csv'
    empty.write_text('')
    with pytest.raises(EmptyFile):
        ingest_csv(empty)

    header_only = tmp_path / 'header.csv'
    header_only.write_text('frame,vehicle_id,lane,t,p,v,a\n')
    with pytest.raises(EmptyFile):
        ingest_csv(header_only)

    gap = tmp_path / 'gap.csv'
    gap.write_text('frame,vehicle_id,lane,t,p,v,a\n'
                   '0,a,mainline,0.0,0.0,10.0,0.0\n'
                   '1,a,mainline,0.04,0.4,10.0,0.0\n'
                   '3,a,mainline,0.12,1.2,10.0,0.0\n')
    with pytest.raises(SchemaError, match='frame 3'):
        ingest_csv(gap)

    with pytest.raises(FileNotFoundError):
        ingest_csv(tmp_path / 'nope.csv')


def test_pair_manifest_round_trip(tmp_path, synthetic_pairs):
    manifest = write_pair_manifest(synthetic_pairs, tmp_path)
    loaded = load_pair_manifest(manifest)
    assert [p.pair_id for p in loaded] == [p.pair_id for p in synthetic_pairs]
    for original, reloaded in zip(synthetic_pairs, loaded):
        assert reloaded.sequence is original.sequence
        assert reloaded.t_mer == pytest.approx(original.t_mer)
        assert reloaded.baseline_gap_s == pytest.approx(original.baseline_gap_s, abs=1e-4)
        assert reloaded.onramp.lane is Lane.ONRAMP
        assert not reloaded.onramp.ingested
