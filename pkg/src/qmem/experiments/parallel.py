"""Worker pool for embarrassingly parallel sweep points."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_jobs(jobs: int | None = None) -> int:
    """Explicit ``jobs``, else $QMEM_JOBS, else the available parallelism."""
    if jobs is None:
        env = os.environ.get("QMEM_JOBS")
        if env:
            try:
                jobs = int(env)
            except ValueError:
                raise ValueError(f"QMEM_JOBS={env!r} is not an integer") from None
        else:
            try:
                jobs = len(os.sched_getaffinity(0))
            except AttributeError:  # pragma: no cover - non-Linux
                jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ValueError(f"worker count must be >= 1, got {jobs}")
    return jobs


def run_points(fn, items, jobs: int | None = None) -> list:
    """``[fn(i) for i in items]``, fanned out over processes when jobs > 1.

    Results come back in input order, so output never depends on scheduling.
    """
    items = list(items)
    n = min(resolve_jobs(jobs), len(items))
    if n <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
