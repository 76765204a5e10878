import pytest

ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's verdict for the terminal summary."""

    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
