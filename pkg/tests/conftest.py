import numpy as np
import pytest

from radialnls import EquationParams, build_grid, minimize_quotient, shoot_ode


@pytest.fixture(scope="session")
def params_default():
    return EquationParams(gamma=1.0, mu=1.0, omega=1.0)


@pytest.fixture(scope="session")
def grid_default():
    return build_grid(4096, 32.0)


@pytest.fixture(scope="session")
def grid_small():
    return build_grid(2048, 16.0)


@pytest.fixture(scope="session")
def ground_default(params_default, grid_default):
    res = minimize_quotient(params_default, grid_default)
    assert res.converged
    return res


@pytest.fixture(scope="session")
def ground_oracle(params_default, grid_default):
    return shoot_ode(params_default, (0.5, 30.0), grid_default)


@pytest.fixture(scope="session")
def q10_free():
    params = EquationParams(gamma=0.0, mu=1.0, omega=1.0)
    res = minimize_quotient(params, build_grid(4096, 32.0))
    assert res.converged
    return res


@pytest.fixture()
def rng():
    return np.random.default_rng(20240813)
