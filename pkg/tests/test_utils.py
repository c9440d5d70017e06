import logging
import threading
from concurrent.futures import ThreadPoolExecutor

import pytest

from utils import metrics, parallel
from utils.errors import DomainError, LabError, ManifestError
from utils.logger import setup_logging
from utils.parallel import get_default_threads, map_ordered, set_default_threads


@pytest.fixture
def restore_threads():
    saved = get_default_threads()
    yield
    set_default_threads(saved)


def test_map_ordered_keeps_input_order(restore_threads):
    items = list(range(50))
    assert map_ordered(lambda x: x * x, items, threads=4) == [x * x for x in items]
    set_default_threads(2)
    assert map_ordered(lambda x: -x, items) == [-x for x in items]
    assert map_ordered(lambda x: x, []) == []


def test_map_ordered_uses_process_wide_default(mocker):
    mocker.patch.object(parallel, '_default_threads', 3)
    pool = mocker.patch('utils.parallel.ThreadPoolExecutor', wraps=ThreadPoolExecutor)
    assert map_ordered(lambda x: x + 1, range(8), threads=None) == list(range(1, 9))
    assert pool.call_args.kwargs['max_workers'] == 3


def test_single_thread_runs_inline():
    seen = set()

    def work(x):
        seen.add(threading.current_thread().name)
        return x

    map_ordered(work, range(4), threads=1)
    assert seen == {threading.current_thread().name}


def test_threads_must_be_positive(restore_threads):
    with pytest.raises(ValueError):
        set_default_threads(0)


def test_errors_are_lab_errors():
    e = ManifestError('params.beta', 'must be > 0')
    assert e.path == 'params.beta'
    assert str(e) == 'params.beta: must be > 0'
    assert isinstance(e, LabError) and isinstance(e, ValueError)
    assert issubclass(DomainError, ValueError)


def test_setup_logging(tmp_path):
    root = logging.getLogger()
    saved_handlers, saved_level = list(root.handlers), root.level
    try:
        log_file = tmp_path / 'logs' / 'lab.log'
        setup_logging({'level': 'debug', 'file': str(log_file)})
        assert root.level == logging.DEBUG
        assert len(root.handlers) == 2
        logging.getLogger('lab.test').info('hello')
        for handler in root.handlers:
            handler.flush()
        assert 'hello' in log_file.read_text()
        with pytest.raises(ValueError):
            setup_logging({'level': 'LOUD'})
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers[:] = saved_handlers
        root.setLevel(saved_level)


def test_metrics_textfile(tmp_path):
    metrics.record_samples('mean', 128)
    metrics.record_verdicts('unit', ['holds', 'violated'])
    metrics.record_exit_status(2)
    path = tmp_path / 'lab.prom'
    assert metrics.write_metrics_file(path)
    text = path.read_text()
    assert 'superconcentration_samples_drawn_total{kind="mean"}' in text
    assert 'superconcentration_verdicts_total{check="unit",verdict="violated"}' in text
    assert 'superconcentration_last_exit_status 2.0' in text
    assert not metrics.write_metrics_file(tmp_path / 'missing' / 'lab.prom')
