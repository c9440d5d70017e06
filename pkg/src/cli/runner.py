"""
Command-line surface: argument parsing, manifest assembly and the run loop.

Precedence for every setting is command-line flag > manifest > environment
> built-in default.
"""

import argparse
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from __version__ import VERSION_STRING
from cli.commands import COMMAND_HANDLERS, CommandResult, RunContext
from cli.reports import write_csv_report, write_json_report
from config.config_loader import (
    BETA_SQRT_LOG_N,
    COMMANDS,
    ExperimentManifest,
    get_default_manifest,
    load_manifest,
)
from config.env_config import Settings, load_settings_from_env
from gaussian.rng import stream_from_seed
from semigroup.grid import TimeGrid
from semigroup.mehler import MehlerConfig
from stats.estimate import EstimatorConfig
from utils.errors import LabError, ManifestError
from utils.logger import setup_logging
from utils.metrics import record_command_duration, record_exit_status, write_metrics_file
from utils.parallel import set_default_threads

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATED = 2

# Commands whose --n is a list of sizes
TABLE_COMMANDS = ('variance-table', 'bounds-table')


def _csv_numbers(text: str, cast=float) -> List[Any]:
    try:
        return [cast(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _beta(text: str):
    if text == BETA_SQRT_LOG_N:
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number or {BETA_SQRT_LOG_N}, got {text!r}")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    run = common.add_argument_group('run options')
    run.add_argument('--manifest', type=Path, help='JSON/YAML experiment manifest')
    run.add_argument('--seed', type=int, help='root seed (default: LAB_SEED or 0)')
    run.add_argument('--threads', type=int, help='worker thread cap; never changes results')
    run.add_argument('--out', type=Path, help='output directory (default: LAB_OUTPUT_DIR or reports)')
    run.add_argument('--metrics-file', type=Path, help='prometheus textfile to write at exit')
    run.add_argument('--log-level', help='logging level (default: LOG_LEVEL or INFO)')

    p = common.add_argument_group('experiment parameters')
    p.add_argument('--model', choices=('rem', 'sk'))
    p.add_argument('--function', choices=('rem', 'max', 'linear', 'quadratic'))
    p.add_argument('--n', type=lambda s: _csv_numbers(s, int), help='size, or comma list for tables')
    p.add_argument('--beta', type=_beta)
    p.add_argument('--T', type=float, dest='T')
    p.add_argument('--Ts', type=_csv_numbers, dest='Ts')
    p.add_argument('--r', type=int)
    p.add_argument('--kind', choices=('I', 'I_r', 'J_r', 'K', 'Gamma2', 'Hessian'))
    p.add_argument('--normalization', choices=('gamma', 'factor2'))
    p.add_argument('--regime')
    p.add_argument('--gamma', type=float)
    p.add_argument('--constant', type=float)
    p.add_argument('--sharp', action='store_true', default=None)
    p.add_argument('--properties', action='store_true', default=None)
    p.add_argument('--i0', type=float)
    p.add_argument('--it', type=float)
    p.add_argument('--trials', type=int)
    p.add_argument('--max-dim', type=int, dest='max_dim')
    p.add_argument('--max-support', type=int, dest='max_support')

    s = common.add_argument_group('sampling')
    s.add_argument('--samples', type=int)
    s.add_argument('--batches', type=int)
    s.add_argument('--inner-samples', type=int, dest='inner_samples')
    s.add_argument('--outer-samples', type=int, dest='outer_samples')
    s.add_argument('--grid-points', type=int, dest='grid_points')
    s.add_argument('--t-max', type=float, dest='t_max')
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='superconcentration-lab',
        description='Numerical checks of Gamma-calculus variance bounds for spin-glass free energies.',
    )
    parser.add_argument('--version', action='version', version=VERSION_STRING)
    common = _common_parser()
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('run', parents=[common], help='run the command named in --manifest')
    for command in COMMANDS:
        handler = COMMAND_HANDLERS[command]
        sub.add_parser(command, parents=[common], help=(handler.__doc__ or '').strip().splitlines()[0])
    return parser


PARAM_FLAGS = ('model', 'function', 'beta', 'T', 'Ts', 'r', 'kind', 'normalization', 'regime', 'gamma',
               'constant', 'sharp', 'properties', 'i0', 'it', 'trials', 'max_dim', 'max_support')


def assemble_manifest(args: argparse.Namespace, settings: Settings) -> ExperimentManifest:
    """
    Merge defaults, the manifest file, environment and flags into one validated manifest

    Raises:
        ManifestError: If the result does not validate
    """
    loaded: Dict[str, Any] = load_manifest(args.manifest) if args.manifest else {}
    command = args.command
    if command == 'run':
        if not loaded:
            raise ManifestError('command', "the run subcommand needs --manifest")
        command = loaded['command']
    elif loaded and loaded['command'] != command:
        raise ManifestError('command', f"manifest is for {loaded['command']}, not {command}")

    data = get_default_manifest(command, settings.seed)
    for section in ('params', 'grid', 'estimator', 'mehler'):
        if section in loaded:
            data[section] = dict(loaded[section]) if section == 'params' else dict(data[section], **loaded[section])
    for key in ('seed', 'version', 'output'):
        if key in loaded:
            data[key] = loaded[key]

    params = data['params']
    for key in PARAM_FLAGS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if args.n is not None:
        if command in TABLE_COMMANDS:
            params['ns'] = args.n
        elif len(args.n) != 1:
            raise ManifestError('params.n', f"{command} takes a single size, got {args.n}")
        else:
            params['n'] = args.n[0]
    if args.seed is not None:
        data['seed'] = args.seed
    for flag, section, key in (('samples', 'estimator', 'samples'), ('batches', 'estimator', 'batches'),
                               ('batches', 'mehler', 'batches'), ('inner_samples', 'mehler', 'inner_samples'),
                               ('outer_samples', 'mehler', 'outer_samples'), ('grid_points', 'grid', 'points'),
                               ('t_max', 'grid', 't_max')):
        value = getattr(args, flag, None)
        if value is not None:
            data[section][key] = value
    return ExperimentManifest.from_dict(data)


def build_context(manifest: ExperimentManifest, threads: Optional[int]) -> RunContext:
    try:
        estimator = EstimatorConfig(threads=threads, **manifest.estimator)
        mehler = MehlerConfig(threads=threads, **manifest.mehler)
    except ValueError as e:
        raise ManifestError('estimator', str(e))
    try:
        grid = TimeGrid.from_spec(manifest.grid)
    except LabError as e:
        raise ManifestError('grid', str(e))
    return RunContext(stream_from_seed(manifest.seed), estimator, mehler, grid)


def execute(manifest: ExperimentManifest, ctx: RunContext, out_dir: Path) -> CommandResult:
    """Run one command and write its JSON and CSV reports."""
    handler = COMMAND_HANDLERS[manifest.command]
    result = handler(manifest, ctx)
    stem = manifest.command.replace('-', '_')
    write_json_report(out_dir / f'{stem}.json', manifest.to_dict(), result.body)
    write_csv_report(out_dir / f'{stem}.csv', result.rows, result.columns)
    return result


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run the command and return the exit status

    Returns:
        0 when every check holds (or holds within CI), 2 on any violated
        verdict, 1 on configuration or usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_ERROR

    try:
        settings = load_settings_from_env()
    except ValueError as e:
        logging.error(f"Invalid environment: {e}")
        return EXIT_ERROR
    log_config = settings.logging_config()
    if args.log_level:
        log_config['level'] = args.log_level
    try:
        setup_logging(log_config)
    except ValueError as e:
        logging.error(f"Invalid logging configuration: {e}")
        return EXIT_ERROR

    metrics_file = args.metrics_file or settings.metrics_file
    started = time.monotonic()
    command = args.command
    status = EXIT_ERROR
    try:
        manifest = assemble_manifest(args, settings)
        command = manifest.command
        threads = args.threads or settings.threads
        set_default_threads(threads)
        ctx = build_context(manifest, threads)
        out_dir = Path(args.out or manifest.output_dir or settings.output_dir)
        logger.info(f"Starting {VERSION_STRING}: {command} seed={manifest.seed} threads={threads}")
        result = execute(manifest, ctx, out_dir)
        status = EXIT_VIOLATED if result.violated else EXIT_OK
        logger.info(f"{command} finished with exit status {status}")
    except (ManifestError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
    except LabError as e:
        logger.error(f"{command} rejected its inputs: {e}")
    except Exception as e:
        logger.error(f"Unexpected error in {command}: {e}", exc_info=True)
    finally:
        record_command_duration(command, time.monotonic() - started)
        record_exit_status(status)
        if metrics_file:
            write_metrics_file(metrics_file)
    return status
