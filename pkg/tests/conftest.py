import numpy as np
import pytest

from collatzprob import build_tau_table

_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def table_1e5():
    return build_tau_table(100_000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
