"""Ordered fan-out of independent computations."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply fn to every item, possibly concurrently; results keep the input order.

    fn must not mutate shared state; meshes are shared, not copied.
    """
    values = list(items)
    if threads <= 1 or len(values) <= 1:
        return [fn(v) for v in values]
    with ThreadPoolExecutor(max_workers=min(threads, len(values))) as pool:
        return list(pool.map(fn, values))
