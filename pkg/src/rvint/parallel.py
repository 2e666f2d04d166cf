"""Order-preserving concurrent map over Monte Carlo chunks."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def ordered_map(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, evaluated on up to ``workers`` threads.

    Results come back in input order regardless of completion order, so a
    reduction over them is deterministic.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
