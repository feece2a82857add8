import pytest

from oracles import ACCEPTANCE_LINES
from tumorstab.base_state import mu_star_3d, solve_base_state
from tumorstab.periodic_orbit import ModelParams, NutrientProfile


@pytest.fixture(scope="session")
def phi_cos():
    return NutrientProfile.cosine(2.0, 0.8, period=1.0)


@pytest.fixture(scope="session")
def mu_star(phi_cos):
    return mu_star_3d(1.0, phi_cos)


@pytest.fixture(scope="session")
def stable_state(phi_cos, mu_star):
    return solve_base_state(ModelParams(0.5 * mu_star, 1.0, 1.0), phi_cos)


@pytest.fixture(scope="session")
def unstable_state(phi_cos, mu_star):
    return solve_base_state(ModelParams(2.0 * mu_star, 1.0, 1.0), phi_cos)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
