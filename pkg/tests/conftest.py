import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from markovtype import chains, spaces

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid8():
    return spaces.generate("grid", (8, 8))


@pytest.fixture(scope="session")
def cube4():
    return spaces.generate("hypercube", (4,))


@pytest.fixture(scope="session")
def three_state_chain():
    P = np.array([[0.2, 0.5, 0.3], [0.5, 0.1, 0.4], [0.3, 0.4, 0.3]])
    return chains.ReversibleChain(P, np.full(3, 1 / 3))


def random_reversible_chain(rng, n, density=1.0):
    """Random conductances on a connected graph (a path plus random extras)."""
    W = np.zeros((n, n))
    for i in range(n - 1):
        W[i, i + 1] = rng.uniform(0.1, 1.0)
    extra = rng.random((n, n)) < density
    W += np.triu(np.where(extra, rng.uniform(0.1, 1.0, (n, n)), 0.0), 1)
    W = W + W.T + np.diag(rng.uniform(0.0, 0.5, n))
    return chains.from_conductances(W)


# lines recorded by test_acceptance, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
