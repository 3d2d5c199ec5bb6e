import numpy as np
import pytest

from jacobi_debranges import JacobiMatrix, random_jacobi, spectral_decomposition

# lines collected by the acceptance suite, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def sym2():
    """N = 2, a = (1), b = (0, 0): eigenvalues -1, 1 with weights 1/2."""
    J = JacobiMatrix(a=[1.0], b=[0.0, 0.0])
    return J, spectral_decomposition(J)


@pytest.fixture
def free1():
    """N = 1, b = (0): S(t, 0) = t and rho = 1."""
    J = JacobiMatrix(a=[], b=[0.0])
    return J, spectral_decomposition(J)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sd(n, rng, **kw):
    J = random_jacobi(n, rng, **kw)
    return J, spectral_decomposition(J)
