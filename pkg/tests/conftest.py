"""Collects acceptance-criterion outcomes and prints them at the end of the run."""
import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """record(n, ok, detail): prints and stores one line per acceptance criterion."""
    def record(n, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {detail}"
        ACCEPTANCE.setdefault(n, []).append((ok, line))
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        for _, line in ACCEPTANCE[n]:
            terminalreporter.write_line(line)
