import numpy as np
import pytest

from sbha import DistanceOracle, make_sphere_mesh, mesh_biharmonic

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sphere1():
    return make_sphere_mesh(1)


@pytest.fixture(scope="session")
def sphere2():
    return make_sphere_mesh(2)


@pytest.fixture(scope="session")
def sphere3():
    return make_sphere_mesh(3)


@pytest.fixture(scope="session")
def sphere2_K(sphere2):
    return DistanceOracle(sphere2).full_matrix()


@pytest.fixture(scope="session")
def sphere3_K(sphere3):
    return DistanceOracle(sphere3).full_matrix()


@pytest.fixture(scope="session")
def sphere2_M(sphere2):
    return mesh_biharmonic(sphere2)


@pytest.fixture(scope="session")
def sphere3_M(sphere3):
    return mesh_biharmonic(sphere3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
