"""Order-preserving parallel map capped by ``FTAPLAB_THREADS``."""

from concurrent.futures import ThreadPoolExecutor
import os


def thread_count():
    raw = os.environ.get("FTAPLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError("FTAPLAB_THREADS must be a positive integer, got %r" % raw) from None


def pmap(fn, items):
    """``[fn(x) for x in items]``, run on up to ``FTAPLAB_THREADS`` threads."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
