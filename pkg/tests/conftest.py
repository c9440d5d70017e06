import os
import sys
from pathlib import Path

import pytest

# pytest.ini sets pythonpath; this keeps `python -m pytest tests/test_x.py` working from anywhere
SRC = Path(__file__).resolve().parent.parent / 'src'
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from gaussian.rng import stream_from_seed  # noqa: E402
from semigroup.grid import TimeGrid  # noqa: E402
from semigroup.mehler import MehlerConfig  # noqa: E402
from stats.estimate import EstimatorConfig  # noqa: E402

LAB_ENV = ('LAB_SEED', 'LAB_THREADS', 'LAB_OUTPUT_DIR', 'LAB_METRICS_FILE', 'LOG_LEVEL', 'LOG_FILE')


@pytest.fixture
def rng():
    return stream_from_seed(20240607)


@pytest.fixture
def small_estimator():
    return EstimatorConfig(samples=2048, batches=16, target_rel_ci=0.05, max_samples=16384)


@pytest.fixture
def small_mehler():
    return MehlerConfig(inner_samples=32, outer_samples=512, batches=16, max_outer_samples=4096)


@pytest.fixture
def short_grid():
    return TimeGrid.geometric(t_max=4.0, points=10)


@pytest.fixture
def clean_env(mocker):
    """Environment without any of the lab's variables."""
    env = {k: v for k, v in os.environ.items() if k not in LAB_ENV}
    mocker.patch.dict(os.environ, env, clear=True)
    return env
