import pytest


def pytest_configure(config):
    config._criteria = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(1, ok, "detail")``."""

    def record(number, ok, detail):
        prev = request.config._criteria.get(number)
        if prev is not None:
            ok, detail = prev[0] and ok, f"{prev[1]}; {detail}"
        request.config._criteria[number] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config._criteria
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(rows):
        ok, detail = rows[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {detail}")
