"""Writers and readers for batch outputs and the evaluation report."""
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from ..config.cases import REPORT_MEASURES
from ..config.settings import DEFAULT_PATHS, SIMULATION_SETTINGS
from .kinematics import Lane
from .metrics import (FuelCoefficients, PairMetrics, aggregate, evaluate_pair,
                      improvement_rates, rate_conventions, significance_summary)
from .planner import MergeSpec
from .scenario import ingest_csv, write_tracks_csv
from .simulation import BatchResult, CaseKind, SimOutput

logger = logging.getLogger(__name__)

CASE_ORDER = [case.value for case in CaseKind]


def _rounded(obj):
    """Round floats for JSON output; NaN and infinities become None."""
    if isinstance(obj, dict):
        return {key: _rounded(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(value) for value in obj]
    if isinstance(obj, (float, np.floating)):
        return round(float(obj), 6) if np.isfinite(obj) else None
    return obj


def _write_json(data, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_rounded(data), f, indent=2, ensure_ascii=False)
        f.write('\n')
    return path


class ReportWriter:
    """Writes a batch to an output directory and builds the report from those files."""

    def __init__(self, out_dir: Union[str, Path], coeffs: FuelCoefficients = FuelCoefficients()):
        self.out_dir = Path(out_dir)
        self.coeffs = coeffs

    def write_batch(self, batch: BatchResult, zones: Optional[Dict[str, str]] = None) -> Path:
        """Per-run trajectory CSVs, the events log and the batch manifest."""
        zones = zones or {}
        self.out_dir.mkdir(parents=True, exist_ok=True)
        runs = []
        events_path = self.out_dir / DEFAULT_PATHS['events']
        with open(events_path, 'w', encoding='utf-8') as events_file:
            for out in batch.outputs:
                runs.append(self._write_run(out, zones.get(out.pair_id, '')))
                events_file.write(json.dumps(_rounded({
                    'pair_id': out.pair_id,
                    'case': out.case.value,
                    'flags': list(out.flags),
                    'events': [event.to_dict() for event in out.events],
                    'verdicts': [verdict.to_dict() for verdict in out.verdicts],
                })) + '\n')
        manifest = {
            'runs': runs,
            'failures': [{'pair_id': f.pair_id, 'case': f.case.value, 'error': f.error}
                         for f in batch.failures],
        }
        path = _write_json(manifest, self.out_dir / DEFAULT_PATHS['batch'])
        logger.info("Wrote %d run(s) to %s", len(runs), self.out_dir)
        return path

    def _write_run(self, out: SimOutput, zone: str) -> dict:
        csv_path = self.out_dir / DEFAULT_PATHS['runs'] / out.case.value / f"{out.pair_id}.csv"
        write_tracks_csv([out.onramp, out.mainline], csv_path, {out.onramp.vehicle_id: out.spec.t_mer})
        return {
            'pair_id': out.pair_id,
            'case': out.case.value,
            'zone': zone,
            't_mer': out.spec.t_mer,
            'p_merge': out.spec.p_merge,
            'sequence': out.spec.sequence.value,
            'h': out.spec.h,
            'l': out.spec.l,
            'onramp_id': out.onramp.vehicle_id,
            'mainline_id': out.mainline.vehicle_id,
            'energy_onramp': out.energy_onramp,
            'energy_mainline': out.energy_mainline,
            'flags': list(out.flags),
            'trajectories': csv_path.relative_to(self.out_dir).as_posix(),
        }

    def write_report(self, metrics: Dict[str, Dict[str, List[PairMetrics]]]) -> List[Path]:
        """Report files for every zone found in ``metrics`` (zone -> case -> pair metrics)."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for zone, by_case in sorted(metrics.items()):
            suffix = zone or 'all'
            table = report_table(by_case)
            csv_path = self.out_dir / f"report_{suffix}.csv"
            table.to_csv(csv_path, float_format='%.6f', lineterminator='\n')
            written.append(csv_path)

            summaries = {case: aggregate(values) for case, values in by_case.items()}
            if 'baseline' in summaries:
                rates = {case: improvement_rates(summaries['baseline'], summary)
                         for case, summary in _ordered(summaries) if case != 'baseline'}
                written.append(_write_json({'zone': zone, 'conventions': rate_conventions(),
                                            'rates': rates},
                                           self.out_dir / f"improvements_{suffix}.json"))
            if 'case2' in by_case and 'case3' in by_case:
                written.append(_write_json({'zone': zone, 'a': 'case2', 'b': 'case3',
                                            'tests': significance_summary(by_case['case2'], by_case['case3'])},
                                           self.out_dir / f"significance_{suffix}.json"))

            breakdown = sequence_breakdown(by_case)
            seq_path = self.out_dir / f"sequences_{suffix}.csv"
            breakdown.to_csv(seq_path, index=False, float_format='%.6f', lineterminator='\n')
            written.append(seq_path)
        return written


def _ordered(by_case: dict):
    return sorted(by_case.items(), key=lambda item: CASE_ORDER.index(item[0]))


def report_table(by_case: Dict[str, List[PairMetrics]]) -> pd.DataFrame:
    """Rows are measures, columns are cases in Baseline, Case 1-3 order."""
    columns = {}
    for case, values in _ordered(by_case):
        summary = aggregate(values)
        columns[case] = [summary.get(measure, np.nan) for measure in REPORT_MEASURES]
    table = pd.DataFrame(columns, index=REPORT_MEASURES)
    table.index.name = 'measure'
    return table


def sequence_breakdown(by_case: Dict[str, List[PairMetrics]]) -> pd.DataFrame:
    rows = []
    for case, values in _ordered(by_case):
        groups = defaultdict(list)
        for m in values:
            groups[m.sequence].append(m)
        for sequence in sorted(groups):
            summary = aggregate(groups[sequence])
            row = {'case': case, 'sequence': sequence}
            row.update({measure: summary[measure] for measure in REPORT_MEASURES})
            row['n'] = int(summary['n'])
            rows.append(row)
    return pd.DataFrame(rows, columns=['case', 'sequence'] + REPORT_MEASURES + ['n'])


def zone_comparison(summaries: Dict[str, Dict[str, Dict[str, float]]]) -> Dict[str, Dict[str, dict]]:
    """On-ramp A-RMS and fuel reduction (%) against the baseline, per zone and case."""
    comparison = {}
    for zone, by_case in sorted(summaries.items()):
        baseline = by_case.get('baseline')
        if baseline is None:
            logger.warning("No baseline results for zone %s", zone)
            continue
        comparison[zone] = {}
        for case, summary in _ordered(by_case):
            if case == 'baseline':
                continue
            rates = improvement_rates(baseline, summary)
            comparison[zone][case] = {
                'arms_onramp_reduction': rates.get('arms_onramp'),
                'fuel_onramp_reduction': rates.get('fuel_onramp'),
            }
    return comparison


def write_zone_comparison(comparison: dict, path: Union[str, Path]) -> Path:
    return _write_json(comparison, Path(path))


def load_batch_metrics(batch_path: Union[str, Path],
                       coeffs: FuelCoefficients = FuelCoefficients(),
                       dt: float = SIMULATION_SETTINGS['dt']) -> Dict[str, Dict[str, List[PairMetrics]]]:
    """Recompute every run's measures from the files a batch wrote (zone -> case -> metrics)."""
    batch_path = Path(batch_path)
    if not batch_path.exists():
        raise FileNotFoundError(f"Batch manifest not found: {batch_path}")
    with open(batch_path, 'r', encoding='utf-8') as f:
        runs = json.load(f)['runs']
    metrics: Dict[str, Dict[str, List[PairMetrics]]] = defaultdict(lambda: defaultdict(list))
    for run in runs:
        records = {r.vehicle_id: r.trajectory for r in
                   ingest_csv(batch_path.parent / run['trajectories'], dt)}
        onramp = records[run['onramp_id']]
        onramp.lane = Lane.ONRAMP
        mainline = records[run['mainline_id']]
        # The run files hold grid samples of piecewise-constant inputs
        onramp.ingested = mainline.ingested = False
        spec = MergeSpec(run['t_mer'], run['p_merge'], run['sequence'], run['h'], run['l'])
        metrics[run['zone']][run['case']].append(
            evaluate_pair(run['pair_id'], onramp, mainline, spec, coeffs,
                          run['energy_onramp'], run['energy_mainline']))
    return {zone: dict(by_case) for zone, by_case in metrics.items()}


def flag_counts(outputs: Iterable[SimOutput]) -> Dict[str, Dict[str, int]]:
    counts: Dict[str, Dict[str, int]] = defaultdict(lambda: defaultdict(int))
    for out in outputs:
        for flag in out.flags:
            counts[out.case.value][flag] += 1
    return {case: dict(flags) for case, flags in counts.items()}


def write_sweep(sweep: Dict[float, Dict[str, float]], path: Union[str, Path]) -> Path:
    rows = [{'t_id': t_id, **summary} for t_id, summary in sorted(sweep.items())]
    return _write_json({'case': CaseKind.CASE2_CAV_CAV_VIS.value, 'sweep': rows}, Path(path))
