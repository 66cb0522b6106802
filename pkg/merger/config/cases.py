"""Case, zone and mode tables."""

# Evaluation cases
SUPPORTED_CASES = {
    'baseline': 'Baseline (recorded trajectories)',
    'case1': 'Case 1: CAV-THV, recursive control after VIS',
    'case2': 'Case 2: CAV-CAV with VIS, cooperative control after VIS',
    'case3': 'Case 3: CAV-CAV without VIS, cooperative control from the Start Line',
}

# Merging zones on the auxiliary lane, Start Line at p = 0
MERGING_ZONES = {
    'one-third': (230.0, 300.0),   # Aggressive merging, upper bound open
    'two-thirds': (300.0, 370.0),  # Moderate merging, upper bound closed
}

COOPERATION_MODES = {
    'bilateral': 'Both vehicles plan to the merging point',
    'unilateral': 'Only the on-ramp vehicle is controlled, mainline holds speed',
}

VIS_MODES = {
    'fixed': 'Fixed identification time',
    'statistical': 'M-of-N chi-square evidence window',
}

# Report settings
REPORT_MEASURES = [
    'gap_s',
    'arms_onramp',
    'arms_mainline',
    'fuel_onramp',
    'fuel_mainline',
    'energy_onramp',
    'energy_mainline',
    'collisions',
]
