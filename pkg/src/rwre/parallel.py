"""Index-ordered chunked execution.

Work is split into contiguous index ranges; results are concatenated in
index order, so the output never depends on the number of workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def resolve_workers(workers=None) -> int:
    if workers is None:
        workers = int(os.environ.get("RWRE_WORKERS", "1"))
    return max(1, int(workers))


def map_chunks(func, total: int, workers: int = 1, chunk_size: int = 4096) -> np.ndarray:
    """Concatenate ``func(lo, hi)`` over ``[0, total)`` in chunks of ``chunk_size``."""
    bounds = [(lo, min(lo + chunk_size, total)) for lo in range(0, total, chunk_size)]
    if not bounds:
        return np.empty(0)
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) == 1:
        parts = [func(lo, hi) for lo, hi in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: func(*b), bounds))
    return np.concatenate(parts)
