"""Chunked node evaluation with an optional thread pool.

Results are concatenated in chunk order, so outputs do not depend on the
worker count.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

WORKERS_ENV = "KAHLERLAB_WORKERS"
DEFAULT_CHUNK = 2048


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def map_chunks(fn, npoints: int, chunk: int = DEFAULT_CHUNK):
    """Apply ``fn(slice)`` over consecutive slices of ``range(npoints)``.

    ``fn`` returns an array or a tuple/dict of arrays whose leading axis is
    the point axis; pieces are concatenated along that axis.
    """
    slices = [slice(i, min(i + chunk, npoints)) for i in range(0, npoints, chunk)]
    workers = worker_count()
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, slices))
    else:
        parts = [fn(s) for s in slices]
    first = parts[0]
    if isinstance(first, dict):
        return {key: np.concatenate([p[key] for p in parts]) for key in first}
    if isinstance(first, tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(first)))
    return np.concatenate(parts)
