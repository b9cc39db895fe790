import numpy as np
import pytest

from radlap.discretize import assemble_laplacian
from radlap.eigensolve import eigendecompose
from radlap.geometry import circle, interval, rectangle

ACCEPTANCE_LINES = []


def record(criterion, ok, detail=""):
    """Log one acceptance line; the summary is printed at the end of the run."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def decompose(domain, count=None):
    return eigendecompose(assemble_laplacian(domain), count)


@pytest.fixture(scope="session")
def interval_2000():
    return decompose(interval(1.0, 2000, "dirichlet"), 60)


@pytest.fixture(scope="session")
def square_64():
    return decompose(rectangle(np.pi, np.pi, (64, 64), "dirichlet"), 60)


@pytest.fixture(scope="session")
def circle_256():
    return decompose(circle(2 * np.pi, 256), 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
