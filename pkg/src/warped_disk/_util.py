"""Small shared helpers: parallel map and deterministic CSV output."""

import csv
import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "WARPED_DISK_THREADS"


def thread_budget() -> int:
    """Worker cap from the WARPED_DISK_THREADS environment variable (default 1)."""
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Map ``fn`` over ``items`` preserving order, threaded if allowed."""
    items = list(items)
    workers = min(thread_budget(), len(items)) if items else 1
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def fmt17(x) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    """Write rows of floats/ints/strings; floats get 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt17(v) if isinstance(v, float) else v for v in row])
