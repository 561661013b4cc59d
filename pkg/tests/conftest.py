import numpy as np
import pytest

from spectral import ExternalPotential, assemble_operator, build_domain, make_weights


@pytest.fixture(scope="session")
def line199():
    return build_domain(1, [1.0], [199])


@pytest.fixture(scope="session")
def well():
    return ExternalPotential.square_well(-50.0, [0.25], [0.75])


@pytest.fixture(scope="session")
def geometric4():
    return make_weights("geometric", 4, 1, alpha=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric(seed, n=8):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A + A.T


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number][1])
