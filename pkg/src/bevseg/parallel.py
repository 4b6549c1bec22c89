"""Thread-based work distribution.

The heavy kernels in this package are numpy calls that release the GIL, so
plain threads give real parallelism without pickling. Every call site is
required to produce results that are bitwise independent of worker count;
map_workers preserves input order to make that easy.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidConfigError


def map_workers(fn, items, workers: int = 1) -> list:
    """Apply fn to each item, in order, with up to `workers` threads."""
    if workers < 1:
        raise InvalidConfigError(f"worker count must be >= 1, got {workers}")
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def chunk_ranges(n: int, chunks: int) -> list[tuple[int, int]]:
    """Split range(n) into at most `chunks` contiguous, non-empty spans."""
    chunks = max(1, min(chunks, n)) if n > 0 else 1
    bounds = [n * i // chunks for i in range(chunks + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
