import pytest

CRITERION_LINES: list[str] = []


@pytest.fixture
def criterion_report():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def _report(number: int, ok: bool, detail: str) -> bool:
        line = f"CRITERION {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        CRITERION_LINES.append(line)
        print(line, flush=True)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
