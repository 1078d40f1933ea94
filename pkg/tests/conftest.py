import pytest

from ubac_ldpc.degree_model import reference_code

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def code1():
    return reference_code("code1")


@pytest.fixture(scope="session")
def code2():
    return reference_code("code2")


@pytest.fixture(scope="session")
def code3():
    return reference_code("code3")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
