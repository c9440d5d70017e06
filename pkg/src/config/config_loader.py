import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from __version__ import __version__
from utils.errors import ManifestError

logger = logging.getLogger(__name__)

COMMANDS = (
    'ic-check',
    'cd-check',
    'semigroup-curve',
    'variance-table',
    'bounds-table',
    'bw-check',
    'cel-check',
    'partial-bound',
    'ground-state',
    'simplex-lemma',
)

FUNCTIONS = ('rem', 'max', 'linear', 'quadratic')
MODELS = ('rem', 'sk')
CURVE_KINDS = ('I', 'I_r', 'J_r', 'K', 'Gamma2', 'Hessian')
NORMALIZATIONS = ('gamma', 'factor2')
REGIMES = {
    'rem': ('high', 'envelope', 'low', 'chatterjee'),
    'sk': ('high', 'logn'),
}

ESTIMATOR_KEYS = ('samples', 'batches', 'target_rel_ci', 'max_samples')
MEHLER_KEYS = ('inner_samples', 'outer_samples', 'antithetic', 'batches', 'target_rel_ci', 'max_outer_samples')
GRID_KINDS = ('geometric', 'uniform', 'explicit')

# beta = sqrt(log n) per table row, for the low-temperature REM table
BETA_SQRT_LOG_N = 'sqrt_log_n'


@dataclass
class ExperimentManifest:
    """Everything that determines the bytes of a report body.

    Thread count and the output directory stay out of ``to_dict``;
    neither changes a result.
    """

    command: str
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    grid: Dict[str, Any] = field(default_factory=dict)
    estimator: Dict[str, Any] = field(default_factory=dict)
    mehler: Dict[str, Any] = field(default_factory=dict)
    version: str = __version__
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentManifest':
        validate_manifest(data)
        return cls(
            command=data['command'],
            seed=int(data['seed']),
            params=copy.deepcopy(data.get('params', {})),
            grid=copy.deepcopy(data.get('grid', {})),
            estimator=copy.deepcopy(data.get('estimator', {})),
            mehler=copy.deepcopy(data.get('mehler', {})),
            version=str(data.get('version', __version__)),
            output_dir=(data.get('output') or {}).get('dir'),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'command': self.command,
            'seed': self.seed,
            'params': self.params,
            'grid': self.grid,
            'estimator': self.estimator,
            'mehler': self.mehler,
            'version': self.version,
        }


def load_manifest(manifest_path: Path) -> Dict[str, Any]:
    """
    Load an experiment manifest from a JSON or YAML file

    Args:
        manifest_path: Path to the manifest

    Returns:
        Dict containing the validated manifest

    Raises:
        FileNotFoundError: If the manifest file doesn't exist
        ManifestError: If the manifest is malformed
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"Manifest file not found: {manifest_path}")

    try:
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ManifestError('<root>', f"not valid JSON/YAML: {e}")

    if manifest is None:
        manifest = {}
    validate_manifest(manifest)
    logger.info(f"Manifest loaded from {manifest_path}: command={manifest['command']}")
    return manifest


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ManifestError(path, message)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_positive(params: Dict[str, Any], key: str, integer: bool = False) -> None:
    if key not in params:
        return
    value = params[key]
    path = f'params.{key}'
    _require(_is_int(value) if integer else _is_number(value), path,
             f"must be {'an integer' if integer else 'a number'}, got {value!r}")
    _require(value > 0, path, f"must be > 0, got {value}")


def _check_nonnegative(params: Dict[str, Any], key: str) -> None:
    if key in params:
        value = params[key]
        _require(_is_number(value) and value >= 0, f'params.{key}', f"must be a number >= 0, got {value!r}")


def _check_int_list(params: Dict[str, Any], key: str, minimum: int = 1) -> None:
    if key not in params:
        return
    values = params[key]
    path = f'params.{key}'
    _require(isinstance(values, list) and len(values) > 0, path, "must be a non-empty list")
    for i, v in enumerate(values):
        _require(_is_int(v) and v >= minimum, f'{path}[{i}]', f"must be an integer >= {minimum}, got {v!r}")


def _check_number_list(params: Dict[str, Any], key: str) -> None:
    if key not in params:
        return
    values = params[key]
    path = f'params.{key}'
    _require(isinstance(values, list) and len(values) > 0, path, "must be a non-empty list")
    for i, v in enumerate(values):
        _require(_is_number(v) and v >= 0, f'{path}[{i}]', f"must be a number >= 0, got {v!r}")


def _check_choice(params: Dict[str, Any], key: str, choices) -> None:
    if key in params:
        _require(params[key] in choices, f'params.{key}',
                 f"must be one of {', '.join(choices)}, got {params[key]!r}")


def _check_section(manifest: Dict[str, Any], section: str, keys) -> None:
    block = manifest.get(section)
    if block is None:
        return
    _require(isinstance(block, dict), section, "must be a mapping")
    for key, value in block.items():
        path = f'{section}.{key}'
        _require(key in keys, path, "unknown key")
        if key == 'antithetic':
            _require(isinstance(value, bool), path, "must be true or false")
        elif key == 'target_rel_ci':
            _require(_is_number(value) and value > 0, path, f"must be a positive number, got {value!r}")
        else:
            _require(_is_int(value) and value >= 2, path, f"must be an integer >= 2, got {value!r}")


def _check_grid(manifest: Dict[str, Any]) -> None:
    grid = manifest.get('grid')
    if grid is None:
        return
    _require(isinstance(grid, dict), 'grid', "must be a mapping")
    kind = grid.get('kind', 'geometric')
    _require(kind in GRID_KINDS, 'grid.kind', f"must be one of {', '.join(GRID_KINDS)}, got {kind!r}")
    if kind == 'explicit':
        points = grid.get('points')
        _require(isinstance(points, list) and len(points) > 0, 'grid.points', "must be a non-empty list of times")
        for i, t in enumerate(points):
            _require(_is_number(t) and t >= 0, f'grid.points[{i}]', f"must be a time >= 0, got {t!r}")
        _require(all(a < b for a, b in zip(points, points[1:])), 'grid.points', "must be strictly increasing")
    else:
        if 'points' in grid:
            _require(_is_int(grid['points']) and grid['points'] >= 2, 'grid.points',
                     f"must be an integer >= 2, got {grid['points']!r}")
        if 't_max' in grid:
            _require(_is_number(grid['t_max']) and grid['t_max'] > 0, 'grid.t_max',
                     f"must be a positive number, got {grid['t_max']!r}")
        if 'first' in grid:
            _require(_is_number(grid['first']) and grid['first'] > 0, 'grid.first',
                     f"must be a positive number, got {grid['first']!r}")


def validate_manifest(manifest: Dict[str, Any]) -> None:
    """
    Validate that the manifest is well formed

    Args:
        manifest: Manifest dictionary to validate

    Raises:
        ManifestError: With the dotted path of the first offending entry
    """
    _require(isinstance(manifest, dict), '<root>', "manifest must be a mapping")
    _require('command' in manifest, 'command', "is required")
    _require(manifest['command'] in COMMANDS, 'command',
             f"must be one of {', '.join(COMMANDS)}, got {manifest['command']!r}")
    _require('seed' in manifest, 'seed', "is required")
    _require(_is_int(manifest['seed']) and 0 <= manifest['seed'] < 2 ** 64, 'seed',
             f"must be an unsigned 64-bit integer, got {manifest['seed']!r}")

    params = manifest.get('params', {})
    _require(isinstance(params, dict), 'params', "must be a mapping")
    if params.get('beta') == BETA_SQRT_LOG_N:
        _require(manifest['command'] == 'bounds-table', 'params.beta',
                 f"{BETA_SQRT_LOG_N} is only meaningful for bounds-table")
    else:
        _check_positive(params, 'beta')
    _check_positive(params, 'n', integer=True)
    _check_positive(params, 'r', integer=True)
    _check_nonnegative(params, 'T')
    _check_positive(params, 'gamma')
    _check_positive(params, 'constant')
    _check_positive(params, 'trials', integer=True)
    _check_positive(params, 'max_dim', integer=True)
    _check_positive(params, 'max_support', integer=True)
    _check_positive(params, 'i0')
    _check_positive(params, 'it')
    _check_int_list(params, 'ns')
    _check_number_list(params, 'Ts')
    _check_choice(params, 'function', FUNCTIONS)
    _check_choice(params, 'model', MODELS)
    _check_choice(params, 'kind', CURVE_KINDS)
    _check_choice(params, 'normalization', NORMALIZATIONS)
    if 'regime' in params:
        model = params.get('model', 'rem')
        _check_choice(params, 'regime', REGIMES[model])
    if 'n' in params and params.get('model') == 'sk':
        _require(params['n'] <= 24, 'params.n', f"SK enumeration supports n <= 24, got {params['n']}")

    _check_grid(manifest)
    _check_section(manifest, 'estimator', ESTIMATOR_KEYS)
    _check_section(manifest, 'mehler', MEHLER_KEYS)
    output = manifest.get('output')
    if output is not None:
        _require(isinstance(output, dict), 'output', "must be a mapping")
        _require(set(output) <= {'dir'}, 'output', "only 'dir' is supported")


def get_default_manifest(command: str, seed: int = 0) -> Dict[str, Any]:
    """
    A manifest with sensible defaults for ``command``
    """
    params = {
        'ic-check': {'model': 'rem', 'n': 16, 'beta': 0.5},
        'cd-check': {'function': 'rem', 'n': 8, 'beta': 0.5},
        'semigroup-curve': {'function': 'rem', 'n': 8, 'beta': 0.5, 'kind': 'I'},
        'variance-table': {'function': 'rem', 'ns': [8, 16], 'beta': 0.5},
        'bounds-table': {'model': 'rem', 'regime': 'high', 'ns': [64, 256], 'beta': 0.3},
        'bw-check': {'function': 'rem', 'n': 8, 'beta': 0.5, 'T': 1.0},
        'cel-check': {'function': 'rem', 'n': 8, 'beta': 0.5, 'Ts': [0.5, 1.0, 2.0]},
        'partial-bound': {'function': 'rem', 'n': 8, 'beta': 0.5, 'T': 1.0},
        'ground-state': {'n': 10, 'beta': 0.25},
        'simplex-lemma': {'trials': 1000, 'max_dim': 20, 'max_support': 50},
    }
    if command not in params:
        raise ManifestError('command', f"must be one of {', '.join(COMMANDS)}, got {command!r}")
    return {
        'command': command,
        'seed': seed,
        'params': params[command],
        'grid': {'kind': 'geometric', 't_max': 6.0, 'points': 24},
        'estimator': {'samples': 4096, 'batches': 32, 'target_rel_ci': 0.05, 'max_samples': 65536},
        'mehler': {'inner_samples': 256, 'outer_samples': 1024, 'batches': 32, 'max_outer_samples': 8192},
        'version': __version__,
    }
