"""Thread-pool helpers; results always come back in submission order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

ENV_THREADS = "SPARSE_SSRV_THREADS"


def resolve_workers(workers: Optional[int] = None) -> int:
    """Explicit value wins, then ``SPARSE_SSRV_THREADS``; 0 means all cores."""
    if workers is None:
        raw = os.environ.get(ENV_THREADS, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if workers == 0:
        workers = os.cpu_count() or 1
    if workers < 0:
        raise ValueError("worker count must be non-negative")
    return workers


def parallel_map(fn: Callable, items: Iterable, workers: Optional[int] = 1) -> List:
    items = list(items)
    n = resolve_workers(workers)
    if n <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
