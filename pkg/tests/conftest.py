import pytest

from builders import ACCEPTANCE_LOG, Parties


@pytest.fixture
def parties():
    return Parties("buyer", "seller", "stranger")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
