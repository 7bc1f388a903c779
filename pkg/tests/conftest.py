import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kherding import Domain, KernelSpec, analytic_embedding, empirical_embedding, sample_measure

settings.register_profile("ci", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gauss2():
    spec = KernelSpec("gaussian", Domain.box(2))
    return spec, analytic_embedding(spec)


@pytest.fixture(scope="session")
def sphere():
    spec = KernelSpec("sphere_distance", Domain.sphere())
    return spec, analytic_embedding(spec)


@pytest.fixture(scope="session")
def matern2():
    spec = KernelSpec("matern32", Domain.box(2))
    return spec, empirical_embedding(spec, 2000, np.random.default_rng(7))


@pytest.fixture
def gauss_candidates(gauss2):
    return sample_measure(gauss2[0].domain, "truncated_gaussian", 300, np.random.default_rng(5))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
