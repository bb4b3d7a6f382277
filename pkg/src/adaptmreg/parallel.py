"""Deterministic work splitting.

Replicate loops are cut into a fixed chunk grid so that results depend only
on the grid and on per-replicate substreams, never on how many workers
happened to execute the chunks.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

from .errors import ValidationError

CHUNK = 1024

WORKERS_ENV = "ADAPTMREG_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, then the ADAPTMREG_WORKERS variable, then cpu count."""
    if workers is None:
        raw = os.environ.get(WORKERS_ENV, "").strip()
        if raw:
            try:
                workers = int(raw)
            except ValueError as exc:
                raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
        else:
            workers = os.cpu_count() or 1
    workers = int(workers)
    if workers < 1:
        raise ValidationError("worker count must be at least 1")
    return workers


def chunk_ranges(total: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def run_chunks(task: Callable[[int, int], None], total: int,
               workers: int | None = None, chunk: int = CHUNK) -> None:
    """Apply task(lo, hi) over the fixed chunk grid.

    The task must write results into preallocated slots indexed by replicate;
    return values are discarded, which keeps outputs independent of
    scheduling order and of the worker count.
    """
    ranges = chunk_ranges(total, chunk)
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(ranges) <= 1:
        for lo, hi in ranges:
            task(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        # list() forces completion and re-raises worker exceptions
        list(pool.map(lambda bounds: task(*bounds), ranges))
