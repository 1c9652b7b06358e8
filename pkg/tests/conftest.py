from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

# criterion number -> list of (status, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def fixtures():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        for status, detail in ACCEPTANCE[key]:
            terminalreporter.write_line(f"criterion {key}: {status}  {detail}")
