"""On-ramp merge evaluation package."""
from .core.simulation import CaseKind, SimConfig, run_batch, run_case

__version__ = "0.1.0"
__all__ = ["CaseKind", "SimConfig", "run_batch", "run_case"]
