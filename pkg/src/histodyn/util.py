"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap(default=1):
    """Data-parallel width, capped by the HISTODYN_THREADS variable."""
    raw = os.environ.get("HISTODYN_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


def parallel_map(fn, items, width=None):
    """Order-preserving map, threaded when the configured width allows."""
    width = thread_cap() if width is None else width
    items = list(items)
    if width <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=width) as pool:
        return list(pool.map(fn, items))
