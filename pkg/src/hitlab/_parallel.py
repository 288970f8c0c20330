"""Deterministic fan-out over replicate chunks.

Work is always split into the same chunks with the same substreams no
matter how many workers run, and results are reduced in chunk order,
so aggregate results are bit-identical for every parallelism setting.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def map_ordered(fn, items, workers: int = 1) -> list:
    """Apply `fn` to each item, in order, optionally on a thread pool."""
    if workers < 1:
        raise ValueError("workers must be at least 1")
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_sizes(total: int, chunk: int) -> list[int]:
    """Fixed chunking of `total` work items, independent of worker count."""
    if total < 0 or chunk < 1:
        raise ValueError("need total >= 0 and chunk >= 1")
    full, rem = divmod(total, chunk)
    return [chunk] * full + ([rem] if rem else [])
