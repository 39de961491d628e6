# Use separate multiprocessing library because mapped callables are closures
# and bound methods, that are not supported with a default library.
import logging
from typing import Callable, Iterable, List, TypeVar

from multiprocess import Pool, cpu_count

from config import config


logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

n_cpus = cpu_count()

_pool = None


def workers() -> int:
    """Worker count from config.n_workers; 0 or less means all cpus but one"""
    if config.n_workers <= 0:
        return max(n_cpus - 1, 1)
    return min(config.n_workers, n_cpus)


def get_pool():
    global _pool

    if _pool is None:
        _pool = Pool(processes=workers())
        logger.debug('started a pool of %d workers', workers())
    return _pool


def close_pool():
    global _pool

    if _pool is not None:
        _pool.close()
        _pool.join()
        _pool = None


def pmap(f: Callable[[T], R], items: Iterable[T], chunksize: int = 4) -> List[R]:
    """
    Order-preserving map over a lambda- or x-grid.
    Runs serially unless config.use_pool is set and more than one worker is allowed,
    so results are identical either way.
    """
    items = list(items)
    if not config.use_pool or workers() < 2 or len(items) < 2:
        return [f(item) for item in items]

    return get_pool().map(f, items, chunksize=chunksize)
