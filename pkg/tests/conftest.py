import pytest

from helpers import h2_setup


@pytest.fixture(scope="session")
def h2():
    return h2_setup()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
