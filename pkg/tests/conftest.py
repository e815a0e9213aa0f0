"""Shared pytest plumbing for the acceptance summary section."""

import pytest

_CRITERIA = []


@pytest.fixture
def record_criterion():
    """One pass/fail line per acceptance criterion, echoed in the summary."""

    def _record(number, description, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {description}"
        if detail:
            line += f" -- {detail}"
        _CRITERIA.append((number, line))
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
