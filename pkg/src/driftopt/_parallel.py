"""Chunked thread-pool helpers.

Work is always split into chunks whose boundaries depend only on the
problem size, never on the worker count, and results are reassembled in
chunk order. Reductions are performed afterwards on the concatenated
per-path arrays, so outputs are bit-identical for any number of threads.
"""
import os
from concurrent.futures import ThreadPoolExecutor

CHUNK_SIZE = 2048

_default_threads = None


def set_num_threads(n):
    """Set the default worker count (``None`` restores ``os.cpu_count()``)."""
    global _default_threads
    if n is not None and int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _default_threads = None if n is None else int(n)


def get_num_threads(threads=None):
    if threads is not None:
        return max(1, int(threads))
    if _default_threads is not None:
        return _default_threads
    return os.cpu_count() or 1


def chunk_bounds(total, chunk_size=CHUNK_SIZE):
    return [(s, min(s + chunk_size, total)) for s in range(0, total, chunk_size)]


def map_chunks(fn, total, threads=None, chunk_size=CHUNK_SIZE):
    """Apply ``fn(start, stop)`` over fixed chunks of ``range(total)``.

    Returns the list of results in chunk order.
    """
    bounds = chunk_bounds(total, chunk_size)
    workers = min(get_num_threads(threads), len(bounds))
    if workers <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
