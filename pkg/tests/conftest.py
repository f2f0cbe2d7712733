import pytest

from cuspfold.toys import toy_t1


@pytest.fixture(scope="session")
def t1():
    return toy_t1(2)


@pytest.fixture(scope="session")
def t1_one():
    return toy_t1(1)


@pytest.fixture(scope="session")
def t1_three():
    return toy_t1(3)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
