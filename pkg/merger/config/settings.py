"""Simulation settings and configurations."""

SIMULATION_SETTINGS = {
    'dt': 0.04,              # Sampling step (25 Hz, same as the drone data)
    't_min': 0.2,            # Minimum control horizon in seconds
    'accel_bound': 4.0,      # Comfort bound on |u| in m/s^2 (flag only)
    'advance': 'exact',      # Recursive propagation: 'exact' or 'zoh'
    'seed': 42,
    'jobs': None,            # Worker processes; None uses every available core
}

MERGE_SETTINGS = {
    'h': 1.8,                # Safe merging time gap in seconds
    'l': 2.5,                # Vehicle length in meters
    'eps_v': 0.05,           # Terminal speed tolerance in m/s
    'eps_g': 0.05,           # Terminal gap tolerance in seconds
    'min_follower_speed': 0.1,
    'mode': 'bilateral',     # Cooperation mode for Cases 2-3
}

VIS_SETTINGS = {
    'sigma_g': 1.0,          # GPS error std per axis (m)
    'sigma_r': 0.1,          # Radar error std per axis (m)
    'alpha': 0.05,           # Per-sample significance level
    'mode': 'fixed',         # 'fixed' or 'statistical'
    't_id': 3.5,             # Fixed identification time (s)
    'window_n': 88,          # Statistical evidence window (samples)
    'min_matches': 70,       # Matches needed inside the window
    'radar_range': 150.0,    # Radar detection range (m)
    'lane_offset': 3.5,      # Lateral offset between auxiliary lane and mainline (m)
    'distractor_offsets': [-30.0, 30.0],
}

GENERATOR_SETTINGS = {
    'n_pairs': 100,
    'zone': 'one-third',
    'danger_threshold_s': 1.8,
    'lead_fraction': 0.82,
    'onramp_speed': (15.0, 30.0),
    'mainline_speed': (20.0, 35.0),
    'min_gap_s': 0.2,
    'max_attempts': 1000,
    'max_initial_offset': 145.0,   # Keeps the mainline vehicle inside radar range
    'seed': 7,
}

# Fuel rate polynomial coefficients (mL/s based)
FUEL_COEFFICIENTS = {
    'theta0': 0.1569,
    'theta1': 0.0245,
    'theta2': -7.415e-4,
    'theta3': 5.975e-5,
    'sig0': 7.224e-2,
    'sig1': 9.681e-2,
    'sig2': 1.075e-3,
    'decel_rule': 'literal',  # 'literal' zeroes the whole rate when a < 0
}

# Default paths
DEFAULT_PATHS = {
    'output': 'output',
    'manifest': 'pairs.json',
    'trajectories': 'trajectories',
    'runs': 'runs',
    'batch': 'batch.json',
    'events': 'events.jsonl',
    'effective_config': 'effective_config.yaml',
}
