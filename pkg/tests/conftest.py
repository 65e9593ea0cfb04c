import numpy as np
import pytest

from pwbddc.oracle import dense_reference

_CRITERIA = []


@pytest.fixture(scope="session")
def tiny():
    """Dense reference on n=2, m=1, p=6, kappa=2pi with deluxe scaling."""
    return dense_reference()


@pytest.fixture(scope="session")
def tiny_multiplicity():
    return dense_reference(scaling="multiplicity")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion():
    """Record one acceptance line; all lines are repeated in the terminal summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _CRITERIA.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
