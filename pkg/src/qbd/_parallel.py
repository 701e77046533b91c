"""Thread-count policy shared by parallel loops."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    """Worker cap from ``QBD_THREADS`` (default: CPU count)."""
    raw = os.environ.get("QBD_THREADS", "").strip()
    cpus = os.cpu_count() or 1
    if not raw:
        return cpus
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, cpus * 4))


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]`` evaluated on a thread pool, order preserved."""
    items = list(items)
    workers = workers or max_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
