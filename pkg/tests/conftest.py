import numpy as np
import pytest

import nclab
from nclab.single_species import ReactionSpec, solve_steady_monotone


def cosine_field(grid, mean=1.0, amplitude=0.5, periods=1.0):
    phase = 2.0 * np.pi * periods * (grid.nodes - grid.x_lo) / grid.length
    return nclab.ScalarField(grid, mean + amplitude * np.cos(phase))


@pytest.fixture(scope="session")
def grid100():
    return nclab.make_grid(0.0, 1.0, 100)


@pytest.fixture(scope="session")
def grid200():
    return nclab.make_grid(0.0, 1.0, 200)


@pytest.fixture(scope="session")
def gauss100(grid100):
    return nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.1), grid100)


@pytest.fixture(scope="session")
def gauss200(grid200):
    return nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.1), grid200)


@pytest.fixture(scope="session")
def op_n100(grid100, gauss100):
    return nclab.assemble_operator("N", 1.0, gauss100, grid100)


@pytest.fixture(scope="session")
def op_n200(grid200, gauss200):
    return nclab.assemble_operator("N", 1.0, gauss200, grid200)


@pytest.fixture(scope="session")
def m_cos100(grid100):
    return cosine_field(grid100)


@pytest.fixture(scope="session")
def m_cos200(grid200):
    return cosine_field(grid200)


@pytest.fixture(scope="session")
def steady100(op_n100, m_cos100):
    """Converged single-species state for the standard cosine growth."""
    return solve_steady_monotone(op_n100, ReactionSpec.logistic(m_cos100))


@pytest.fixture(scope="session")
def steady200(op_n200, m_cos200):
    return solve_steady_monotone(op_n200, ReactionSpec.logistic(m_cos200))
