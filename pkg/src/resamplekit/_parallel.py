"""Chunked execution over stream indices.

Work is split into contiguous index ranges; each range is computed
independently from its own streams and the pieces are concatenated in
index order, so output never depends on ``workers``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np


def _ranges(total, parts):
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def map_streams(func, total: int, args: tuple = (), workers: int = 1):
    """Call ``func(start, stop, *args)`` over ``[0, total)`` and concatenate.

    ``func`` must return a tuple of numpy arrays (same count for every
    chunk) or a single array; chunks are joined along the last axis.
    """
    if workers is None or workers <= 1 or total < 2:
        return func(0, total, *args)
    chunks = _ranges(total, min(total, workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_call, [(func, a, b, args) for a, b in chunks]))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p, axis=-1) for p in zip(*parts))
    return np.concatenate(parts, axis=-1)


def _call(job):
    func, a, b, args = job
    return func(a, b, *args)
