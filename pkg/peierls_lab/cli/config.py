"""
Experiment configuration: defaults, config file sections, environment and
command-line overrides, validation and the config hash.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from peierls_lab.classical.couplings import DistributionSpec
from peierls_lab.config import Config
from peierls_lab.errors import ConfigValidationError, DistributionError

logger = logging.getLogger(__name__)

SECTIONS = ('lattice', 'model', 'structure', 'solver', 'params')

DEFAULTS: Dict[str, Any] = {
    'lattice': {'L0': 4, 'Lx': None, 'Ly': None},
    'model': {'J': 1.0, 'couplings': None, 'eps': 0.1, 'h_long': 0.0, 'h_stag': 0.0, 'hhat': 1e-6},
    'structure': {'R': 1, 'L': None, 'cap': None, 'loop_budget': 14, 'n_sampled': 0,
                  'order_parameter': False, 'Delta': None, 'theta': None},
    'solver': {'eig_tol': 1e-10, 'residual_tol': 1e-8, 'krylov_dim': 30, 'krylov_tol': 1e-10},
    'params': {},
    'seed': 0,
    'output_dir': 'runs',
    'jobs': 1,
}

# flat command-line keys and where they land
ALIASES: Dict[str, str] = {
    'L0': 'lattice.L0', 'Lx': 'lattice.Lx', 'Ly': 'lattice.Ly',
    'J': 'model.J', 'couplings': 'model.couplings', 'eps': 'model.eps', 'h': 'model.h_long',
    'h_long': 'model.h_long', 'h_stag': 'model.h_stag', 'hhat': 'model.hhat',
    'R': 'structure.R', 'L': 'structure.L', 'cap': 'structure.cap', 'loop_budget': 'structure.loop_budget',
    'n_sampled': 'structure.n_sampled', 'order_parameter': 'structure.order_parameter',
    'Delta': 'structure.Delta', 'theta': 'structure.theta',
    'eig_tol': 'solver.eig_tol', 'residual_tol': 'solver.residual_tol',
    'krylov_dim': 'solver.krylov_dim', 'krylov_tol': 'solver.krylov_tol',
    'seed': 'seed', 'output_dir': 'output_dir', 'out': 'output_dir', 'jobs': 'jobs',
}

ENV_KEYS = {'PEIERLS_LAB_OUTPUT_DIR': 'output_dir', 'PEIERLS_LAB_JOBS': 'jobs', 'PEIERLS_LAB_SEED': 'seed'}

# excluded from the hash: they change where and how fast, not what
NON_SEMANTIC = ('output_dir', 'jobs')


def parse_value(raw: Any) -> Any:
    """JSON-decode strings where possible ('0.1' -> 0.1, 'true' -> True, '[1,2]' -> [1, 2])."""
    if not isinstance(raw, str):
        return raw
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def set_dotted(data: Dict[str, Any], key: str, value: Any):
    parts = key.split('.')
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigValidationError([f"{key}: '{part}' is not a section"])
    node[parts[-1]] = value


def resolve_key(key: str) -> str:
    """Flat alias, dotted path, or an experiment parameter."""
    key = key.lstrip('-').replace('-', '_') if '.' not in key else key.lstrip('-')
    if '.' in key:
        return key
    return ALIASES.get(key, f"params.{key}")


def deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(',', ':'), default=str)


@dataclass
class ExperimentConfig:
    experiment: str
    lattice: Dict[str, Any] = field(default_factory=dict)
    model: Dict[str, Any] = field(default_factory=dict)
    structure: Dict[str, Any] = field(default_factory=dict)
    solver: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    output_dir: str = 'runs'
    jobs: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return {'experiment': self.experiment, 'lattice': self.lattice, 'model': self.model,
                'structure': self.structure, 'solver': self.solver, 'params': self.params,
                'seed': self.seed, 'output_dir': self.output_dir, 'jobs': self.jobs}

    def semantic_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in self.to_dict().items() if k not in NON_SEMANTIC}

    def canonical(self) -> str:
        return canonical_json(self.semantic_dict())

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode('utf-8')).hexdigest()

    def param(self, name: str, default: Any = None) -> Any:
        value = self.params.get(name)
        return default if value is None else value

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        merged = deep_merge(DEFAULTS, {k: v for k, v in data.items() if k != 'experiment'})
        return cls(experiment=str(data.get('experiment') or ''),
                   **{k: merged[k] for k in SECTIONS}, seed=merged['seed'],
                   output_dir=merged['output_dir'], jobs=merged['jobs'])

    def validate(self, known: Optional[List[str]] = None) -> List[str]:
        return validation_errors(self.to_dict(), known)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validation_errors(data: Dict[str, Any], known: Optional[List[str]] = None) -> List[str]:
    """Every schema problem, each naming its field; [] when the config is valid."""
    errors: List[str] = []
    merged = deep_merge(DEFAULTS, {k: v for k, v in data.items() if k != 'experiment'})

    experiment = data.get('experiment')
    if known is not None and experiment and experiment not in known:
        errors.append(f"experiment: unknown experiment '{experiment}'; choose one of {', '.join(known)}")
    for name in data:
        if name not in DEFAULTS and name != 'experiment' and name != 'settings':
            errors.append(f"{name}: unknown top-level key")
    for name in SECTIONS:
        if not isinstance(merged.get(name), dict):
            errors.append(f"{name}: must be an object")
            return errors

    lat = merged['lattice']
    if lat.get('Lx') is not None or lat.get('Ly') is not None:
        for key in ('Lx', 'Ly'):
            if not _is_int(lat.get(key)) or lat[key] < 1:
                errors.append(f"lattice.{key}: must be a positive integer when Lx/Ly are given, got {lat.get(key)!r}")
    else:
        L0 = lat.get('L0')
        if not _is_int(L0) or L0 < 4 or L0 % 2:
            errors.append(f"lattice.L0: must be an even integer >= 4, got {L0!r}")

    model = merged['model']
    if not _is_number(model.get('J')):
        errors.append(f"model.J: must be a number, got {model.get('J')!r}")
    for key in ('eps', 'hhat'):
        if not _is_number(model.get(key)) or model[key] < 0:
            errors.append(f"model.{key}: must be a number >= 0, got {model.get(key)!r}")
    for key in ('h_long', 'h_stag'):
        if not _is_number(model.get(key)):
            errors.append(f"model.{key}: must be a number, got {model.get(key)!r}")
    couplings = model.get('couplings')
    if isinstance(couplings, dict):
        try:
            DistributionSpec.from_dict(couplings)
        except (DistributionError, TypeError, KeyError) as e:
            errors.append(f"model.couplings: {e}")
    elif couplings is not None and not isinstance(couplings, str):
        errors.append("model.couplings: must be a distribution object or a coupling-file path")

    st = merged['structure']
    if not _is_int(st.get('R')) or st['R'] < 1:
        errors.append(f"structure.R: must be an integer >= 1, got {st.get('R')!r}")
    if st.get('L') is not None and (not _is_int(st['L']) or st['L'] < 4):
        errors.append(f"structure.L: must be an integer >= 4, got {st['L']!r}")
    if st.get('cap') is not None:
        if not _is_int(st['cap']):
            errors.append(f"structure.cap: must be an integer, got {st['cap']!r}")
        elif _is_int(st.get('L')) and st['cap'] < st['L']:
            errors.append(f"structure.cap: must be >= structure.L ({st['L']}), got {st['cap']}")
    if not _is_int(st.get('loop_budget')) or not 4 <= st['loop_budget'] <= 20:
        errors.append(f"structure.loop_budget: must be an integer in [4, 20], got {st.get('loop_budget')!r}")
    if not _is_int(st.get('n_sampled')) or st['n_sampled'] < 0:
        errors.append(f"structure.n_sampled: must be an integer >= 0, got {st.get('n_sampled')!r}")
    for key in ('Delta', 'theta'):
        if st.get(key) is not None and (not _is_number(st[key]) or st[key] <= 0):
            errors.append(f"structure.{key}: must be a positive number, got {st[key]!r}")

    solver = merged['solver']
    for key in ('eig_tol', 'residual_tol', 'krylov_tol'):
        if not _is_number(solver.get(key)) or solver[key] <= 0:
            errors.append(f"solver.{key}: must be a positive number, got {solver.get(key)!r}")
    if not _is_int(solver.get('krylov_dim')) or solver['krylov_dim'] < 2:
        errors.append(f"solver.krylov_dim: must be an integer >= 2, got {solver.get('krylov_dim')!r}")

    if not _is_int(merged.get('seed')) or merged['seed'] < 0:
        errors.append(f"seed: must be an integer >= 0, got {merged.get('seed')!r}")
    if not _is_int(merged.get('jobs')) or merged['jobs'] < 1:
        errors.append(f"jobs: must be an integer >= 1, got {merged.get('jobs')!r}")
    if not isinstance(merged.get('output_dir'), str) or not merged['output_dir']:
        errors.append("output_dir: must be a non-empty path")
    return errors


def environment_overrides() -> Dict[str, Any]:
    out = {}
    for var, key in ENV_KEYS.items():
        value = os.getenv(var)
        if value is not None and value != '':
            out[key] = parse_value(value)
    return out


def load_experiment_config(experiment: Optional[str], config_path: Optional[str] = None,
                           overrides: Optional[Dict[str, Any]] = None,
                           experiment_defaults: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Defaults < experiment defaults < config file < environment < command
    line. `overrides` maps flat or dotted keys to raw values.
    """
    file_data = Config(config_path).config if (config_path or os.getenv('PEIERLS_LAB_CONFIG')) else {}
    settings = file_data.get('settings', {})
    data: Dict[str, Any] = deep_merge(experiment_defaults or {}, {k: v for k, v in file_data.items() if k != 'settings'})
    for key in ('seed', 'output_dir', 'jobs'):
        if key in settings and key not in data:
            data[key] = settings[key]
    data = deep_merge(data, environment_overrides())
    for key, raw in (overrides or {}).items():
        path = resolve_key(key)
        set_dotted(data, path, parse_value(raw))
        if path == 'lattice.L0':
            # an explicit square size replaces a rectangular default
            data['lattice'].update({'Lx': None, 'Ly': None})
    if experiment:
        data['experiment'] = experiment
    config = ExperimentConfig.from_dict(data)
    logger.debug(f"Resolved config {config.hash[:12]}: {config.canonical()}")
    return config


def validate_file(path: str, known: Optional[List[str]] = None) -> List[str]:
    """Schema check of a config file; no side effects."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        return [f"{path}: cannot read config: {e}"]
    if not isinstance(data, dict):
        return [f"{path}: config must be a JSON object"]
    data = {k: v for k, v in data.items() if k != 'settings'}
    return validation_errors(data, known)
