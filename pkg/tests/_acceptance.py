"""PASS/FAIL bookkeeping for the acceptance criteria."""
import time
from contextlib import contextmanager

RESULTS: dict = {}


@contextmanager
def criterion(n: int, title: str, budget: float):
    """Record PASS/FAIL for criterion ``n``; exceeding ``budget`` seconds fails it."""
    notes: list = []
    t0 = time.perf_counter()
    try:
        yield notes
        elapsed = time.perf_counter() - t0
        assert elapsed < budget, f"runtime {elapsed:.2f}s exceeds {budget}s"
    except BaseException as exc:
        elapsed = time.perf_counter() - t0
        RESULTS[n] = ("FAIL", title, elapsed, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    RESULTS[n] = ("PASS", title, elapsed, "; ".join(notes))


def summary_lines() -> list:
    out = []
    for n in sorted(RESULTS):
        status, title, elapsed, note = RESULTS[n]
        out.append(f"{status} criterion {n:2d}: {title} ({elapsed:.2f}s){' | ' + note if note else ''}")
    return out
