import numpy as np
import pytest

from slipgait import (
    AngleGrid,
    IntegratorConfig,
    ModelParams,
    build_mesh,
    shell_constants,
)


@pytest.fixture(scope="session")
def params():
    return ModelParams()


@pytest.fixture(scope="session")
def shell(params):
    return shell_constants(params, 820.0)


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def small_mesh(shell):
    return build_mesh(shell, 400)


@pytest.fixture(scope="session")
def small_grid():
    return AngleGrid(55.0, 90.0, 40)


@pytest.fixture()
def rng():
    # Function-scoped so every test sees the same deterministic stream
    # regardless of which other tests ran first.
    return np.random.default_rng(20260826)
