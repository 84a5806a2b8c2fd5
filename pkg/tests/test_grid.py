import numpy as np
import pytest

from kinmix import (GridFunction, MixtureConfig, build_grid, inner_product,
                    norm, restrict_subspace, weighted_sup_norm)


def test_full3d_maxwellian_mass(config):
    g = build_grid(config, "full3d", (9, 9, 9))
    assert abs(np.sum(g.weights * g.maxwellian(1.0)) - 1.0) < 1e-12


def test_axisym_second_moment(config):
    g = build_grid(config, "axisym-m0", (32, 16))
    val = np.sum(g.weights * g.xi1**2 * g.maxwellian(1.0))
    assert abs(val - 1.0) < 1e-12


def test_odd_moment_vanishes(config):
    g = build_grid(config, "full3d", (9, 9, 9))
    assert abs(np.sum(g.weights * g.nodes[:, 0] * g.maxwellian(1.0))) < 1e-14


@pytest.mark.parametrize("degree,closed", [
    ((2, 0, 0), 1.0), ((4, 0, 0), 3.0), ((2, 2, 0), 1.0), ((0, 0, 4), 3.0),
    ((1, 1, 0), 0.0), ((3, 0, 1), 0.0), ((2, 1, 1), 0.0),
])
def test_gaussian_moments_closed_form(config, degree, closed):
    g = build_grid(config, "full3d", (9, 9, 9))
    p = np.prod([g.nodes[:, d] ** degree[d] for d in range(3)], axis=0)
    assert abs(np.sum(g.weights * p * g.maxwellian(1.0)) - closed) < 1e-10


def test_resolution_and_mode_validation(config):
    with pytest.raises(ValueError):
        build_grid(config, "axisym-m0", (4, 10))
    with pytest.raises(ValueError):
        build_grid(config, "cartesian", (9, 9, 9))


def test_inner_product_chi_normalization(grid_m0):
    g = grid_m0
    sqM = g.sqrt_maxwellian(1.0)
    chi0 = GridFunction(g, sqM)
    chi1 = GridFunction(g, g.xi1 * sqM)
    chi4 = GridFunction(g, (g.speed2 - 3.0) / np.sqrt(6.0) * sqM)
    assert abs(inner_product(chi0, chi0) - 1.0) < 1e-12
    assert abs(inner_product(chi1, chi4)) < 1e-13
    assert abs(inner_product(chi4, chi4) - 1.0) < 1e-12


def test_inner_product_grid_mismatch(config, grid_m0):
    other = build_grid(config, "axisym-m0", (22, 10))
    with pytest.raises(ValueError, match="mismatch"):
        inner_product(GridFunction(grid_m0, np.zeros(grid_m0.size)),
                      GridFunction(other, np.zeros(other.size)))


def test_inner_product_positive_definite(grid_m0):
    rng = np.random.default_rng(0)
    for _ in range(20):
        f = GridFunction(grid_m0, rng.standard_normal(grid_m0.size))
        assert inner_product(f, f).real > 0


def test_inner_product_conjugate_symmetric(grid_m0):
    rng = np.random.default_rng(1)
    f = GridFunction(grid_m0, rng.standard_normal(grid_m0.size)
                     + 1j * rng.standard_normal(grid_m0.size))
    g = GridFunction(grid_m0, rng.standard_normal(grid_m0.size)
                     + 1j * rng.standard_normal(grid_m0.size))
    assert abs(inner_product(f, g) - np.conjugate(inner_product(g, f))) < 1e-12


def test_weighted_sup_norm_exact_cancellation(grid_m0):
    f = GridFunction(grid_m0, (1.0 + grid_m0.speed) ** -3)
    assert abs(weighted_sup_norm(f) - 1.0) < 1e-14
    assert weighted_sup_norm(GridFunction(grid_m0, np.zeros(grid_m0.size))) == 0.0


def test_weighted_sup_norm_admissible_datum(grid_m0):
    # data normalized into the admissible class stay below 1
    q = grid_m0.sqrt_maxwellian(2.0)
    q = q / weighted_sup_norm(GridFunction(grid_m0, q))
    assert weighted_sup_norm(GridFunction(grid_m0, q)) <= 1.0 + 1e-14


def test_restrict_projects_out_xi2(grid_3d):
    g = grid_3d
    f = GridFunction(g, g.nodes[:, 1] * g.sqrt_maxwellian(1.0))
    out = restrict_subspace(f)
    assert norm(out) < 1e-12 * norm(f)


def test_restrict_leaves_chi4(grid_3d):
    g = grid_3d
    f = GridFunction(g, (g.speed2 - 3.0) * g.sqrt_maxwellian(1.0))
    out = restrict_subspace(f)
    assert np.max(np.abs(out.values - f.values)) < 1e-13


def test_restrict_m0_identity(grid_m0, grid_3d):
    # azimuthally symmetric functions are already in the subspace
    prof = lambda x1, rp: np.exp(-0.3 * (x1**2 + rp**2)) * (1 + x1)
    f3 = GridFunction(grid_3d, prof(grid_3d.xi1, grid_3d.rperp))
    out = restrict_subspace(f3)
    assert np.max(np.abs(out.values - f3.values)) < 1e-13
    fm = GridFunction(grid_m0, prof(grid_m0.xi1, grid_m0.rperp))
    assert np.array_equal(restrict_subspace(fm).values, fm.values)


def test_restrict_idempotent_selfadjoint(grid_3d):
    rng = np.random.default_rng(2)
    f = GridFunction(grid_3d, rng.standard_normal(grid_3d.size))
    g = GridFunction(grid_3d, rng.standard_normal(grid_3d.size))
    once = restrict_subspace(f)
    twice = restrict_subspace(once)
    assert np.max(np.abs(once.values - twice.values)) < 1e-12
    assert abs(inner_product(restrict_subspace(f), g)
               - inner_product(f, restrict_subspace(g))) < 1e-12


def test_grid_function_validation(grid_m0):
    with pytest.raises(ValueError):
        GridFunction(grid_m0, np.zeros(grid_m0.size - 1))
    bad = np.zeros(grid_m0.size)
    bad[0] = np.nan
    with pytest.raises(ValueError):
        GridFunction(grid_m0, bad)


def test_reflection_index_exact(grid_m0):
    refl = grid_m0.reflection_index()
    assert np.array_equal(grid_m0.xi1[refl], -grid_m0.xi1)
    assert np.array_equal(grid_m0.rperp[refl], grid_m0.rperp)
    assert np.array_equal(grid_m0.weights[refl], grid_m0.weights)


def test_config_validation():
    with pytest.raises(ValueError):
        MixtureConfig(m_A=-1.0)
    with pytest.raises(ValueError):
        MixtureConfig(rho_B=2.0)
