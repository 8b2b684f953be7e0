import pytest

CRITERIA: dict = {}


@pytest.fixture(scope="session")
def criterion_log():
    return CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
