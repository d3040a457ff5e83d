from __future__ import annotations

import time

import pytest

from latentdag.enumeration import RunConfig, cache_from_rows, classify_all

DIAMOND_TAIL = (5, [(1, 3), (1, 2), (2, 4), (3, 4), (4, 5)])
NEC_FAIL = (6, [(1, 2), (1, 3), (1, 6), (2, 4), (2, 3), (2, 6), (3, 5), (4, 5), (3, 6)])
WERMUTH_CON = (5, [(1, 2), (1, 3), (2, 3), (3, 4), (2, 5)])

# criterion number -> list of (part ok, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


@pytest.fixture(scope="session")
def classified():
    """Classification results for m = 3..6, each m using the previous one as its lower cache.

    Wall-clock seconds per m are stored on the results as ``elapsed``.
    """
    config = RunConfig(workers=1)
    out = {}
    lower = None
    for m in (3, 4, 5, 6):
        t0 = time.perf_counter()
        out[m] = classify_all(m, config, cache_lower=lower, with_gap=m > 3)
        out[m].elapsed = time.perf_counter() - t0
        lower = cache_from_rows(out[m].rows)
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
