"""Layered run configuration: flags > YAML file > environment > defaults."""
import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv

from ..core.errors import InvalidConfig
from ..core.metrics import FuelCoefficients
from ..core.scenario import GeneratorConfig
from ..core.simulation import CaseKind, SimConfig
from ..core.vis import VisConfig
from .cases import SUPPORTED_CASES
from .settings import (DEFAULT_PATHS, FUEL_COEFFICIENTS, GENERATOR_SETTINGS, MERGE_SETTINGS,
                       SIMULATION_SETTINGS, VIS_SETTINGS)

logger = logging.getLogger(__name__)

# Environment variables and the settings they override
ENV_OVERRIDES = {
    'MERGER_SEED': (('simulation', 'seed'), int),
    'MERGER_JOBS': (('simulation', 'jobs'), int),
    'MERGER_OUTPUT_DIR': (('output',), str),
}


def default_layers() -> Dict[str, Any]:
    return {
        'simulation': copy.deepcopy(SIMULATION_SETTINGS),
        'merge': copy.deepcopy(MERGE_SETTINGS),
        'vis': copy.deepcopy(VIS_SETTINGS),
        'generator': copy.deepcopy(GENERATOR_SETTINGS),
        'fuel': copy.deepcopy(FUEL_COEFFICIENTS),
        'cases': list(SUPPORTED_CASES),
        'output': DEFAULT_PATHS['output'],
        'manifest': None,
    }


@dataclass
class RunConfig:
    settings: Dict[str, Any]
    sim: SimConfig
    generator: GeneratorConfig
    fuel: FuelCoefficients
    cases: Tuple[CaseKind, ...]
    output_dir: Path
    manifest: Optional[Path] = None
    jobs: int = 1
    sources: Dict[str, str] = field(default_factory=dict)

    def echo(self, out_dir: Optional[Path] = None) -> Path:
        """Write the effective configuration next to the outputs."""
        out_dir = Path(out_dir or self.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / DEFAULT_PATHS['effective_config']
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(_plain(self.settings), f, sort_keys=True, allow_unicode=True)
        return path


def _plain(value):
    if isinstance(value, dict):
        return {key: _plain(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, Path):
        return value.as_posix()
    return value


def _merge(base: Dict[str, Any], layer: Dict[str, Any], where: str = '') -> Dict[str, Any]:
    for key, value in layer.items():
        if key not in base:
            raise InvalidConfig(f"Unknown setting '{where}{key}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfig(f"Setting '{where}{key}' must be a mapping")
            _merge(base[key], value, f"{where}{key}.")
        elif value is not None:
            base[key] = value
    return base


def _env_layer() -> Dict[str, Any]:
    load_dotenv()
    layer: Dict[str, Any] = {}
    for name, (path, cast) in ENV_OVERRIDES.items():
        raw = os.getenv(name)
        if raw is None or raw == '':
            continue
        try:
            value = cast(raw)
        except ValueError:
            raise InvalidConfig(f"{name}={raw!r} is not a valid {cast.__name__}")
        target = layer
        for key in path[:-1]:
            target = target.setdefault(key, {})
        target[path[-1]] = value
    return layer


def _yaml_layer(path: Union[str, Path, None]) -> Dict[str, Any]:
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path.name} must contain a mapping at the top level")
    return data


def load_config(overrides: Optional[Dict[str, Any]] = None,
                config_file: Union[str, Path, None] = None) -> RunConfig:
    """Build the run configuration from all layers; ``overrides`` hold command-line values."""
    settings = default_layers()
    sources = {}
    for name, layer in (('environment', _env_layer()), ('config file', _yaml_layer(config_file)),
                        ('flags', overrides or {})):
        if layer:
            _merge(settings, layer)
            sources[name] = ', '.join(sorted(layer))
    return build(settings, sources)


def build(settings: Dict[str, Any], sources: Optional[Dict[str, str]] = None) -> RunConfig:
    sim_s, merge_s = settings['simulation'], settings['merge']
    try:
        vis = VisConfig(seed=sim_s['seed'], dt=sim_s['dt'], **settings['vis'])
        sim = SimConfig(
            vis=vis,
            mode=merge_s['mode'],
            dt=sim_s['dt'],
            t_min=sim_s['t_min'],
            accel_bound=sim_s['accel_bound'],
            advance=sim_s['advance'],
            seed=sim_s['seed'],
            eps_v=merge_s['eps_v'],
            eps_g=merge_s['eps_g'],
        )
        generator = GeneratorConfig(h=merge_s['h'], l=merge_s['l'], dt=sim_s['dt'],
                                    **settings['generator'])
        fuel = FuelCoefficients(**settings['fuel'])
        cases = settings['cases']
        if isinstance(cases, str):
            cases = [c.strip() for c in cases.split(',') if c.strip()]
        cases = tuple(CaseKind(c) for c in cases)
    except (TypeError, ValueError) as e:
        if isinstance(e, InvalidConfig):
            raise
        raise InvalidConfig(str(e)) from e
    if not cases:
        raise InvalidConfig("At least one case must be selected")
    if fuel.decel_rule not in ('literal', 'accel_only'):
        raise InvalidConfig(f"Unknown fuel deceleration rule '{fuel.decel_rule}'")
    jobs = sim_s.get('jobs') or os.cpu_count() or 1
    if jobs < 1:
        raise InvalidConfig(f"jobs must be at least 1, got {jobs}")
    manifest = settings.get('manifest')
    return RunConfig(
        settings=settings,
        sim=sim,
        generator=generator,
        fuel=fuel,
        cases=cases,
        output_dir=Path(settings['output']),
        manifest=Path(manifest) if manifest else None,
        jobs=int(jobs),
        sources=sources or {},
    )
