import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(
            f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
