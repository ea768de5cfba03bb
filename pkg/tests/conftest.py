import numpy as np
import pytest

from pxlap.eigen import first_eigenpair
from pxlap.exponents import ExponentField
from pxlap.mesh import build_interval_mesh, build_rectangle_mesh
from pxlap.operator import OperatorContext


@pytest.fixture(scope="session")
def mesh64():
    return build_interval_mesh(0.0, 1.0, 64)


@pytest.fixture(scope="session")
def mesh2d():
    return build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 8, 8)


@pytest.fixture(scope="session")
def p2_64(mesh64):
    return ExponentField(mesh64, 2.0)


@pytest.fixture(scope="session")
def pvar_64(mesh64):
    return ExponentField(mesh64, "2 + x")


@pytest.fixture(scope="session")
def ctx2_64(mesh64, p2_64):
    return OperatorContext(mesh64, p2_64)


@pytest.fixture(scope="session")
def ctxvar_64(mesh64, pvar_64):
    return OperatorContext(mesh64, pvar_64)


@pytest.fixture(scope="session")
def eig2_64(ctx2_64):
    return first_eigenpair(ctx2_64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)


def random_dirichlet_field(mesh, rng, scale=1.0):
    vals = np.zeros(mesh.n_nodes)
    vals[mesh.interior_nodes] = scale * rng.standard_normal(len(mesh.interior_nodes))
    from pxlap.mesh import GridFunction

    return GridFunction(mesh, vals, dirichlet_zero=True)
