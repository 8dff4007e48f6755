import numpy as np
import pytest

from tlnmemory.network import CstlnParams, build_network


@pytest.fixture(scope="session")
def net7():
    return build_network(CstlnParams(7, 0.9, 2.0, 1.0))


@pytest.fixture(scope="session")
def net4():
    return build_network(CstlnParams(4, 0.7, 2.5, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
