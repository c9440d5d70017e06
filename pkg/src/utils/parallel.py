"""Ordered thread-pool mapping used by the Monte Carlo estimators."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

_default_threads = 1


def set_default_threads(threads: int) -> None:
    """Cap the number of worker threads used when callers do not pass one."""
    global _default_threads
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    _default_threads = min(threads, os.cpu_count() or threads)
    logger.debug(f"Worker pool capped at {_default_threads} threads")


def get_default_threads() -> int:
    return _default_threads


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply fn to every item, returning results in input order.

    Each item carries its own random stream, so the output does not depend
    on how many threads run the work.

    Args:
        fn: Work function
        items: Inputs
        threads: Worker cap (defaults to the process-wide setting)

    Returns:
        List of results aligned with items
    """
    items = list(items)
    workers = threads or _default_threads
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
