"""Runtime switches shared by the whole package.

Two environment variables are honored:

``DOLHODGE_NUMBA``   "0"/"false"/"off" forces the pure-numpy kernel path even
                     when numba is installed.  Anything else (or unset) uses
                     numba when importable.
``DOLHODGE_THREADS`` positive integer capping the worker count used for the
                     embarrassingly parallel loops (stencil points, term
                     solves).  Unset means the hardware default.  Results are
                     assembled in deterministic order, so the value never
                     changes numbers.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_FALSY = {"0", "false", "no", "off"}


def numba_requested() -> bool:
    return os.environ.get("DOLHODGE_NUMBA", "1").strip().lower() not in _FALSY


def thread_count() -> int:
    raw = os.environ.get("DOLHODGE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ValueError(f"DOLHODGE_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ValueError(f"DOLHODGE_THREADS must be a positive integer, got {raw!r}")
    return n


def timing_in_reports() -> bool:
    # Embedding measured wall time breaks byte-identical reports; opt-in only.
    return os.environ.get("DOLHODGE_TIMING", "").strip().lower() not in ("", *_FALSY)


def parallel_map(fn, items):
    """Map preserving order; threads capped by DOLHODGE_THREADS.

    Tasks must be independent: the ordered assembly makes the result
    identical for every worker count.
    """
    items = list(items)
    workers = min(thread_count(), max(len(items), 1))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
