"""Shared fixtures.

The two 100-Gaussian reduction tables take a few minutes each, so they are
computed once per session and shared by the unit and acceptance tests.
"""
import pytest

from sogkit import VpConfig, build_sog, imq_kernel, matern_kernel
from sogkit.diagnostics import reduction_table
from sogkit.reduction import reduce_from_balanced

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def imq():
    return imq_kernel()


@pytest.fixture(scope="session")
def matern2():
    return matern_kernel(nu=2)


@pytest.fixture(scope="session")
def imq_approx(imq):
    return build_sog(imq, VpConfig(50, 13))


@pytest.fixture(scope="session")
def imq_table(imq, imq_approx):
    return reduction_table(imq, approx=imq_approx)


@pytest.fixture(scope="session")
def matern_table(matern2):
    return reduction_table(matern2, n=50, n_c=13)


@pytest.fixture(scope="session")
def imq_full(imq_table, imq_approx):
    """The IMQ system reduced to its full numerical rank."""
    bal = imq_table.balanced
    return reduce_from_balanced(bal, imq_approx, q=bal.rank)
