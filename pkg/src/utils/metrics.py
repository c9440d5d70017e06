import logging
from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile

logger = logging.getLogger(__name__)

# A private registry keeps repeated in-process runs (tests) from colliding
# with the global default registry.
registry = CollectorRegistry()

samples_drawn = Counter(
    'superconcentration_samples_drawn_total',
    'Number of Monte Carlo samples drawn',
    ['kind'],
    registry=registry
)

verdicts_issued = Counter(
    'superconcentration_verdicts_total',
    'Number of per-point verdicts issued by inequality checks',
    ['check', 'verdict'],
    registry=registry
)

command_duration = Histogram(
    'superconcentration_command_duration_seconds',
    'Wall time of CLI subcommands',
    ['command'],
    buckets=(0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 300.0, 600.0),
    registry=registry
)

last_exit_status = Gauge(
    'superconcentration_last_exit_status',
    'Exit status of the last run (0=ok, 1=config error, 2=violation)',
    registry=registry
)


def record_samples(kind, count):
    """
    Record Monte Carlo samples drawn

    Args:
        kind: Estimator family (mean, variance, lp_norm, nested, disorder)
        count: Number of samples
    """
    samples_drawn.labels(kind=kind).inc(count)


def record_verdicts(check, verdicts):
    """
    Record the verdicts of one inequality report

    Args:
        check: Report name
        verdicts: Iterable of verdict strings
    """
    for verdict in verdicts:
        verdicts_issued.labels(check=check, verdict=verdict).inc()


def record_command_duration(command, duration):
    """
    Record how long a subcommand took

    Args:
        command: Subcommand name
        duration: Duration in seconds
    """
    command_duration.labels(command=command).observe(duration)


def record_exit_status(status):
    """Update the exit status gauge"""
    last_exit_status.set(status)


def write_metrics_file(path):
    """
    Write the registry in the node-exporter textfile format

    Args:
        path: Destination file

    Returns:
        True when the file was written
    """
    try:
        write_to_textfile(str(path), registry)
        logger.info(f"Metrics written to {path}")
        return True
    except OSError as e:
        logger.error(f"Failed to write metrics file {path}: {e}")
        return False
