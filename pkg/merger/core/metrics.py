"""Safety, comfort and energy measures, aggregation and significance tests."""
import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import stats

from ..config.settings import FUEL_COEFFICIENTS
from .errors import DegenerateSamples
from .kinematics import Trajectory, crossing_time
from .planner import lead_and_follow

logger = logging.getLogger(__name__)

# Lower is better for these; the merging gap is higher-is-better
LOWER_IS_BETTER = ('arms_onramp', 'arms_mainline', 'fuel_onramp', 'fuel_mainline',
                   'energy_onramp', 'energy_mainline')


@dataclass(frozen=True)
class FuelCoefficients:
    theta0: float = FUEL_COEFFICIENTS['theta0']
    theta1: float = FUEL_COEFFICIENTS['theta1']
    theta2: float = FUEL_COEFFICIENTS['theta2']
    theta3: float = FUEL_COEFFICIENTS['theta3']
    sig0: float = FUEL_COEFFICIENTS['sig0']
    sig1: float = FUEL_COEFFICIENTS['sig1']
    sig2: float = FUEL_COEFFICIENTS['sig2']
    decel_rule: str = FUEL_COEFFICIENTS['decel_rule']

    def cruise_rate(self, v):
        return self.theta0 + self.theta1 * v + self.theta2 * v ** 2 + self.theta3 * v ** 3

    def accel_rate(self, v, a):
        return a * (self.sig0 + self.sig1 * v + self.sig2 * v ** 2)


@dataclass(frozen=True)
class PairMetrics:
    pair_id: str
    gap_s: float
    arms_onramp: float
    arms_mainline: float
    fuel_onramp: float
    fuel_mainline: float
    energy_onramp: float = 0.0
    energy_mainline: float = 0.0
    sequence: str = ''

    @property
    def collision(self) -> bool:
        return self.gap_s <= 0.0

    def to_dict(self) -> dict:
        record = asdict(self)
        record['collision'] = self.collision
        return record


@dataclass(frozen=True)
class WelchResult:
    t_stat: float
    dof: float
    p_value: float
    significant_95: bool


def merging_time_gap(lead: Trajectory, follow: Trajectory, p_merge: float, l: float) -> float:
    """Time between the leader's rear clearing ``p_merge`` and the follower's front reaching it.

    Non-positive values are collisions. Trajectories that stop before the
    crossing are continued at their last speed.
    """
    t_follow = crossing_time(follow, p_merge, extrapolate=True)
    t_lead_clear = crossing_time(lead, p_merge + l, extrapolate=True)
    return t_follow - t_lead_clear


def a_rms(traj: Trajectory) -> float:
    if len(traj) == 0:
        raise ValueError("A-RMS of an empty trajectory")
    return float(np.sqrt(np.mean(traj.a ** 2)))


def fuel_rate(v, a, coeffs: FuelCoefficients = FuelCoefficients()):
    """Instantaneous fuel rate in mL/s; decelerating samples follow ``coeffs.decel_rule``."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    rate = coeffs.cruise_rate(v) + coeffs.accel_rate(v, np.maximum(a, 0.0))
    if coeffs.decel_rule == 'literal':
        return np.where(a < 0, 0.0, rate)
    return rate


def fuel(traj: Trajectory, coeffs: FuelCoefficients = FuelCoefficients(),
         dt: Optional[float] = None) -> float:
    """Fuel in mL, rectangle rule over every sample."""
    dt = traj.dt if dt is None else dt
    if len(traj) == 0:
        raise ValueError("Fuel of an empty trajectory")
    return float(np.sum(fuel_rate(traj.v, traj.a, coeffs)) * dt)


def evaluate_pair(pair_id: str, onramp: Trajectory, mainline: Trajectory, spec,
                  coeffs: FuelCoefficients = FuelCoefficients(),
                  energy_onramp: float = 0.0, energy_mainline: float = 0.0) -> PairMetrics:
    """All measures for one run over the window from the Start Line to the merge.

    The gap is taken at the on-ramp vehicle's actual position at the merging
    time.
    """
    k = onramp.index_of(spec.t_mer) if onramp.t[-1] >= spec.t_mer - 1e-9 else len(onramp) - 1
    p_crit = float(onramp.p[k])
    lead, follow = lead_and_follow(onramp, mainline, spec.sequence)
    on_window = onramp.before(spec.t_mer)
    ml_window = mainline.before(spec.t_mer)
    return PairMetrics(
        pair_id=pair_id,
        gap_s=merging_time_gap(lead, follow, p_crit, spec.l),
        arms_onramp=a_rms(on_window),
        arms_mainline=a_rms(ml_window),
        fuel_onramp=fuel(on_window, coeffs),
        fuel_mainline=fuel(ml_window, coeffs),
        energy_onramp=energy_onramp,
        energy_mainline=energy_mainline,
        sequence=spec.sequence.value,
    )


def aggregate(metrics: Iterable[PairMetrics]) -> Dict[str, float]:
    """Mean of every measure, folded in pair_id order; collisions are counted."""
    metrics = sorted(metrics, key=lambda m: m.pair_id)
    if not metrics:
        return {}
    summary = {}
    for f in fields(PairMetrics):
        if f.name in ('pair_id', 'sequence'):
            continue
        summary[f.name] = float(np.mean([getattr(m, f.name) for m in metrics]))
    summary['collisions'] = float(sum(m.collision for m in metrics))
    summary['n'] = float(len(metrics))
    return summary


def improvement_rates(baseline: Dict[str, float], case: Dict[str, float]) -> Dict[str, Optional[float]]:
    """Percentage improvement of ``case`` over ``baseline`` per measure.

    Lower-is-better measures use (baseline - case) / baseline, the merging gap
    uses (case - baseline) / baseline. A zero baseline gives None.
    """
    rates = {}
    for measure in ('gap_s',) + LOWER_IS_BETTER:
        if measure not in baseline or measure not in case:
            continue
        base = baseline[measure]
        if abs(base) < 1e-12:
            rates[measure] = None
            continue
        if measure in LOWER_IS_BETTER:
            rates[measure] = 100.0 * (base - case[measure]) / base
        else:
            rates[measure] = 100.0 * (case[measure] - base) / base
    return rates


def rate_conventions() -> Dict[str, str]:
    conventions = {m: '100*(baseline-case)/baseline' for m in LOWER_IS_BETTER}
    conventions['gap_s'] = '100*(case-baseline)/baseline'
    return conventions


def welch_t_test(xs: Sequence[float], ys: Sequence[float]) -> WelchResult:
    """Welch's unequal-variance t test, two-sided at the 95% level."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2 or len(ys) < 2:
        raise DegenerateSamples("Each sample needs at least two values")
    vx = xs.var(ddof=1) / len(xs)
    vy = ys.var(ddof=1) / len(ys)
    if vx + vy == 0.0:
        if np.mean(xs) == np.mean(ys):
            return WelchResult(0.0, float(len(xs) + len(ys) - 2), 1.0, False)
        raise DegenerateSamples("Both samples are constant")
    dof = (vx + vy) ** 2 / (vx ** 2 / (len(xs) - 1) + vy ** 2 / (len(ys) - 1))
    result = stats.ttest_ind(xs, ys, equal_var=False)
    t_stat = float(result.statistic)
    p_value = float(result.pvalue)
    if math.isnan(p_value):
        raise DegenerateSamples("t statistic is undefined for these samples")
    return WelchResult(t_stat, float(dof), p_value, p_value < 0.05)


def significance_summary(case_a: List[PairMetrics], case_b: List[PairMetrics],
                         measures=('arms_onramp', 'fuel_onramp')) -> Dict[str, dict]:
    """Welch tests between two cases for each measure, with the mean direction."""
    summary = {}
    for measure in measures:
        xs = [getattr(m, measure) for m in sorted(case_a, key=lambda m: m.pair_id)]
        ys = [getattr(m, measure) for m in sorted(case_b, key=lambda m: m.pair_id)]
        try:
            result = welch_t_test(xs, ys)
        except DegenerateSamples as e:
            logger.warning("Skipping significance test for %s: %s", measure, e)
            continue
        summary[measure] = {
            't_stat': result.t_stat,
            'dof': result.dof,
            'p_value': result.p_value,
            'significant_95': result.significant_95,
            'mean_a': float(np.mean(xs)),
            'mean_b': float(np.mean(ys)),
        }
    return summary
