import pytest

from bubble_tower.coefficients import compute_coefficients
from bubble_tower.energy import config_at, find_critical_point
from bubble_tower.model import ModelParams
from bubble_tower.profile import solve_ground_state


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def bubble3():
    return solve_ground_state(3, 3.0)


@pytest.fixture(scope="session")
def bubble2():
    return solve_ground_state(2, 3.0)


@pytest.fixture(scope="session")
def soliton3():
    return solve_ground_state(1, 3.0)


@pytest.fixture(scope="session")
def soliton2():
    return solve_ground_state(1, 2.0)


@pytest.fixture(scope="session")
def coeffs3(bubble3):
    return compute_coefficients(bubble3, 1.0)


@pytest.fixture(scope="session")
def sweep(coeffs3, params):
    """Critical points over k = 10^3 .. 10^6."""
    return [find_critical_point(coeffs3, params, k) for k in (1000, 10000, 100000, 1000000)]


@pytest.fixture(scope="session")
def sweep_configs(sweep, params):
    return [config_at(cp, params.N) for cp in sweep]
