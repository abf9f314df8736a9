from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "ISODIFFI_THREADS"


def resolve_threads(n_jobs: int | None) -> int:
    """Worker count: explicit value, else $ISODIFFI_THREADS, else 1."""
    if n_jobs is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            n_jobs = int(raw)
        except ValueError:
            n_jobs = 1
    if n_jobs <= 0:
        n_jobs = os.cpu_count() or 1
    return n_jobs


def ordered_map(fn: Callable[[T], R], items: Iterable[T], n_jobs: int | None) -> list[R]:
    """Map ``fn`` over ``items`` on a thread pool; results keep input order."""
    items = list(items)
    workers = min(resolve_threads(n_jobs), max(len(items), 1))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
