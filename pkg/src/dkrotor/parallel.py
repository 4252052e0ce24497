"""Deterministic parallel execution of independent work items.

Work items are pure functions of picklable arguments, keyed by position;
results are collected in submission order, so the output is byte-identical
for any worker count.  The DKROTOR_WORKERS environment variable overrides
the configured pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

__all__ = ["resolve_workers", "ordered_map"]

ENV_WORKERS = "DKROTOR_WORKERS"


def resolve_workers(configured: int) -> int:
    env = os.environ.get(ENV_WORKERS)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"{ENV_WORKERS} must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError(f"{ENV_WORKERS} must be >= 1, got {value}")
        return value
    return max(1, configured)


def ordered_map(fn, items, workers: int = 1):
    """map(fn, items) preserving order; a process pool when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))
