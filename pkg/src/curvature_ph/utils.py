#!/usr/bin/env python3
"""
Utility functions for curvature-ph.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "CURVATURE_PH_WORKERS"


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits.

    Args:
        value: Number to format

    Returns:
        Lossless text form of the double (e.g. "1.5", "0.33333333333333331")
    """
    value = float(value)
    if np.isnan(value):
        return "nan"
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Seeded generator; every sampling operation goes through this.

    Distinct streams give independent generators for the same seed.
    """
    if stream == 0:
        return np.random.default_rng(int(seed))
    return np.random.default_rng([int(stream), int(seed)])


def chunked(items: Sequence[T], chunk_size: int) -> Iterator[Sequence[T]]:
    """
    Split a sequence into consecutive chunks.

    Args:
        items: Sequence to split
        chunk_size: Maximum size of each chunk

    Yields:
        Consecutive slices of items, in order
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be at least 1")
    for start in range(0, len(items), chunk_size):
        yield items[start:start + chunk_size]


def worker_count(default: Optional[int] = None) -> int:
    """
    Number of worker threads for batch evaluation.

    Reads CURVATURE_PH_WORKERS, falling back to the available parallelism.
    """
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            count = int(raw)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got '{raw}'")
        if count < 1:
            raise ValueError(f"{WORKERS_ENV} must be at least 1")
        return count
    if default is not None:
        return default
    return os.cpu_count() or 1


def parallel_map(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """
    Map func over items with a thread pool, preserving input order.

    Results never depend on scheduling: each item is evaluated independently
    and the output list follows the input order.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def time_grid(t_end: float, dt: float, t_start: float = 0.0) -> np.ndarray:
    """Sample times t_start, t_start+dt, ... up to and including t_end."""
    count = int(np.floor((t_end - t_start) / dt + 1e-9)) + 1
    return t_start + dt * np.arange(count)
