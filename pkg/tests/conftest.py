from __future__ import annotations

import pytest

# criterion id -> (passed, detail), filled by the acceptance module
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    def record(criterion: str, passed: bool, detail: str) -> bool:
        ACCEPTANCE_RESULTS[criterion] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if passed else 'FAIL'} {detail}")
