"""Bounded thread-pool map used for mode and member parallelism."""
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

T = TypeVar("T")


def parallel_map(fn: Callable[[int], T], count: int, jobs: int = 1) -> List[T]:
    """``[fn(0), ..., fn(count - 1)]`` with at most ``jobs`` calls in flight.

    Results keep index order whatever the completion order.
    """
    if jobs <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(jobs, count)) as pool:
        return list(pool.map(fn, range(count)))
