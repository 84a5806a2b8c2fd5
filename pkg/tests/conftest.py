import numpy as np
import pytest

from kinmix import MixtureConfig, build_grid
from kinmix.operators import (assemble_lba, assemble_operator, constrain_lba,
                              lba_row_images)
from kinmix.spectral import fluid_modes, prepare


@pytest.fixture(scope="session")
def config():
    return MixtureConfig()          # m_A=2, m_B=1, all sigma=1


@pytest.fixture(scope="session")
def grid_m0(config):
    return build_grid(config, "axisym-m0", (20, 10))


@pytest.fixture(scope="session")
def grid_m0_med(config):
    return build_grid(config, "axisym-m0", (28, 14))


@pytest.fixture(scope="session")
def grid_3d(config):
    return build_grid(config, "full3d", (7, 7, 7))


@pytest.fixture(scope="session")
def op_bb(grid_m0, config):
    return assemble_operator("BB", grid_m0, config)


@pytest.fixture(scope="session")
def op_ab(grid_m0, config):
    return assemble_operator("AB", grid_m0, config)


@pytest.fixture(scope="session")
def basis(grid_m0, config):
    return fluid_modes(grid_m0, config)


@pytest.fixture(scope="session")
def sbb(op_bb, basis):
    return prepare(op_bb, basis)


@pytest.fixture(scope="session")
def sab(op_ab, basis):
    return prepare(op_ab, basis)


@pytest.fixture(scope="session")
def op_ba_raw(grid_m0, config):
    return assemble_lba(grid_m0, config, angular_order=12)


@pytest.fixture(scope="session")
def op_ba(op_ba_raw, config, sab):
    return constrain_lba(op_ba_raw, config,
                         row_targets=lba_row_images(op_ba_raw.grid, config),
                         ab_matrix=sab.matrix)


def wnorm(grid, v):
    return float(np.sqrt(np.sum(grid.weights * np.abs(v) ** 2)))
