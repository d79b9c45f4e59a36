import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else ``SCCP_THREADS``, else 1."""
    if threads is None:
        threads = int(os.environ.get("SCCP_THREADS", "1") or 1)
    if threads < 1:
        raise ValueError("threads must be positive")
    return threads


def parallel_map(func, items, threads: int | None = None) -> list:
    """Ordered map; results never depend on the worker count."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
