"""Pass/fail bookkeeping for the acceptance suite, reported at session end."""

import contextlib
import time

RESULTS: dict[int, tuple[bool, str, float, str]] = {}


@contextlib.contextmanager
def criterion(number: int, label: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        detail = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        RESULTS[number] = (False, label, time.perf_counter() - start, detail)
        raise
    RESULTS[number] = (True, label, time.perf_counter() - start, "")


def summary_lines() -> list[str]:
    lines = []
    for n in sorted(RESULTS):
        ok, label, secs, detail = RESULTS[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {label}  ({secs:.1f}s)"
        lines.append(line + (f"  -- {detail}" if detail else ""))
    return lines
