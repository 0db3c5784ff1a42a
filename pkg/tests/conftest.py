import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'} | {detail}"
        _VERDICTS.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_VERDICTS):
        terminalreporter.write_line(line)
