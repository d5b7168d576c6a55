import pytest

# criterion number -> list of (part, passed, detail), filled by the acceptance tests
_RESULTS = {}

TITLES = {
    1: "root correctness",
    2: "small/large-zone asymptotic orders",
    3: "initial data, Cramer vs generic solve, delta -> 0 limit",
    4: "kernel integral rates",
    5: "equal-weight dichotomy and blow-up probes",
    6: "kernel limit identities",
    7: "damped profile errors",
    8: "undamped upper bounds and windowed errors",
    9: "optimal-rate table (30 cells)",
    10: "zone decay at fixed frequency",
}


@pytest.fixture
def record():
    def _record(criterion, part, passed, detail=""):
        _RESULTS.setdefault(criterion, []).append((part, bool(passed), detail))
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_RESULTS):
        parts = _RESULTS[k]
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {TITLES.get(k, '')}")
        for part, passed, detail in parts:
            tr.write_line(f"    [{'ok' if passed else 'FAIL'}] {part}: {detail}")
