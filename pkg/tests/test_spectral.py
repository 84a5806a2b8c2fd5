import numpy as np
import pytest

from kinmix import GridFunction, MixtureConfig, build_grid
from kinmix import spectral as sp
from kinmix.operators import assemble_operator

from conftest import wnorm

LAM = np.sqrt(5.0 / 3.0)


def test_euler_eigenspeeds(basis, grid_m0):
    w = grid_m0.weights
    T = np.array([[np.sum(w * basis.E[i].values * grid_m0.xi1 * basis.E[j].values)
                   for j in range(3)] for i in range(3)])
    lam = np.sort(np.linalg.eigvalsh(T))
    assert np.max(np.abs(lam - np.array([-LAM, 0.0, LAM]))) < 1e-10
    assert abs(LAM - 1.2909944487358056) < 1e-14


def test_E_orthonormal(basis, grid_m0):
    w = grid_m0.weights
    for i in range(3):
        for j in range(3):
            v = np.sum(w * basis.E[i].values * basis.E[j].values)
            assert abs(v - (i == j)) < 1e-12


def test_E2_direction_matches_printed_combination(basis, grid_m0):
    # E2 is the normalized -sqrt(2/3) chi0 + chi4 combination
    w = grid_m0.weights
    raw = -np.sqrt(2.0 / 3.0) * basis.chi[0].values + basis.chi[4].values
    raw /= np.sqrt(np.sum(w * raw**2))
    assert np.max(np.abs(raw - basis.E[1].values)) < 1e-12
    # and its unnormalized norm is sqrt(5/3)
    raw2 = -np.sqrt(2.0 / 3.0) * basis.chi[0].values + basis.chi[4].values
    assert abs(np.sqrt(np.sum(w * raw2**2)) - np.sqrt(5.0 / 3.0)) < 1e-12


def test_ED_normalization(basis, grid_m0, config):
    w = grid_m0.weights
    assert abs(np.sum(w * basis.E_D.values**2) - 1.0) < 1e-12
    # unnormalized |sqrt(M_A)| = 1 only at equal masses
    cfg1 = MixtureConfig(m_A=1.0, m_B=1.0)
    g = build_grid(cfg1, "axisym-m0", (16, 8))
    raw = g.sqrt_maxwellian(1.0)
    assert abs(np.sum(g.weights * raw**2) - 1.0) < 1e-12


def test_projectors(basis, grid_m0):
    rng = np.random.default_rng(20)
    f = GridFunction(grid_m0, rng.standard_normal(grid_m0.size)
                     * np.exp(-0.2 * grid_m0.speed2))
    ED = basis.E_D
    assert np.max(np.abs(sp.project(ED, "P0D", basis).values - ED.values)) < 1e-13
    assert wnorm(grid_m0, sp.project(ED, "P1D", basis).values) < 1e-13
    p0 = sp.project(f, "P0", basis)
    p1 = sp.project(f, "P1", basis)
    assert np.max(np.abs(p0.values + p1.values - f.values)) < 1e-13
    n2 = wnorm(grid_m0, f.values) ** 2
    assert abs(wnorm(grid_m0, p0.values) ** 2 + wnorm(grid_m0, p1.values) ** 2
               - n2) < 1e-12 * n2


def test_projector_excludes_chi2_direction(config):
    from kinmix.grid import restrict_subspace
    g = build_grid(config, "full3d", (7, 7, 7))
    basis3 = sp.fluid_modes(g, config)
    f = GridFunction(g, g.nodes[:, 1] * g.sqrt_maxwellian(1.0))
    fr = restrict_subspace(f)
    # after restriction the chi2-direction content is gone, so P0 sees nothing
    p0 = sp.project(fr, "P0", basis3)
    assert wnorm(g, p0.values) < 1e-12


def test_invert_on_micro_roundtrip(sbb, basis, grid_m0):
    rhs = sp.project(GridFunction(grid_m0, grid_m0.xi1 * basis.E[0].values),
                     "P1", basis)
    x = sp.invert_on_micro(sbb, rhs)
    back = sbb.matrix @ x.values
    assert wnorm(grid_m0, back - rhs.values) <= 1e-8 * wnorm(grid_m0, rhs.values)


def test_invert_on_micro_zero(sbb, grid_m0):
    x = sp.invert_on_micro(sbb, GridFunction(grid_m0, np.zeros(grid_m0.size)))
    assert wnorm(grid_m0, x.values) == 0.0


def test_invert_on_micro_rejects_kernel_component(sbb, basis, grid_m0):
    with pytest.raises(ValueError, match="kernel component"):
        sp.invert_on_micro(sbb, basis.chi[0])


def test_eD_prime_is_odd(sab, basis, grid_m0):
    tc_rhs = grid_m0.xi1 * basis.E_D.values
    w = grid_m0.weights
    tc_rhs -= np.sum(w * basis.E_D.values * tc_rhs) * basis.E_D.values
    x = sp._micro_solve(sab, tc_rhs)
    refl = grid_m0.reflection_index()
    assert np.max(np.abs(x + x[refl])) < 1e-10 * np.max(np.abs(x))


def test_ns_coefficients(sbb):
    A = sp.ns_coefficients(sbb)
    assert abs(A[0] - A[2]) < 1e-8 * abs(A[0])
    assert max(A) < 0


def test_A2_matches_branch_curvature(sbb):
    A = sp.ns_coefficients(sbb)
    curv = 0.5 * sp.curvature_fd(sbb, branch=1)
    assert abs(A[1] - curv) < 1e-3 * abs(A[1])


def test_a2_positive_and_matches_curvature(sab):
    a2 = sp.diffusion_coefficient(sab)
    assert a2 > 0
    lam2 = sp.curvature_fd(sab)
    assert abs(-2.0 * a2 - lam2) < 1e-3 * (2.0 * a2)


def test_a2_sigma_scaling(config):
    """L_AB scales with sigma_AB^2, so a2 scales with sigma_AB^{-2}."""
    g = build_grid(config, "axisym-m0", (16, 8))
    vals = {}
    for s in (1.0, 2.0):
        cfg = MixtureConfig(sigma_AB=s)
        ab = assemble_operator("AB", g, cfg)
        basis = sp.fluid_modes(g, cfg)
        vals[s] = sp.diffusion_coefficient(sp.prepare(ab, basis))
    assert abs(vals[2.0] - 0.25 * vals[1.0]) < 1e-6 * vals[1.0]


def test_dispersion_bb_expansion(sbb):
    ks = np.geomspace(1e-3, 1e-1, 10)
    branches = sp.dispersion_branches(sbb, ks)
    A = sp.ns_coefficients(sbb)
    lam = (-LAM, 0.0, LAM)
    slopes = []
    for j, b in enumerate(branches):
        model = -1j * lam[j] * ks + A[j] * ks**2
        rem = np.abs(b.eigenvalues[1:] - model)
        res = np.polyfit(np.log(ks), np.log(rem + 1e-300), 1)
        slopes.append(res[0])
    assert min(slopes) >= 2.7


def test_dispersion_ab_flat_at_zero(sab):
    h = 1e-3
    branches = sp.dispersion_branches(sab, [h, 2 * h])
    b = branches[0]
    # first derivative at 0 from the tracked values (sigma(0) = 0)
    d1 = abs(b.eigenvalues[1] / h)
    # remove the quadratic part using both points
    lam_pp = (b.eigenvalues[2] - 2 * b.eigenvalues[1]).real / (h * h)
    d1_clean = abs((b.eigenvalues[1] - 0.5 * lam_pp * h * h) / h)
    assert d1_clean < 1e-6 and d1 < 1e-3


def test_dispersion_eigenvalue_real_parts(sbb, sab):
    for sop in (sbb, sab):
        ks = [0.05, 0.3, 1.0]
        for b in sp.dispersion_branches(sop, ks):
            assert np.max(b.eigenvalues.real) <= 1e-10


def test_branch_continuity_overlap(sbb, grid_m0):
    ks = np.linspace(0.02, 0.6, 12)
    branches = sp.dispersion_branches(sbb, ks)
    w = grid_m0.weights
    for b in branches:
        for i in range(1, len(b.k_values) - 1):
            ov = abs(np.sum(w * np.conjugate(b.eigenvectors[i])
                            * b.eigenvectors[i + 1]))
            assert ov >= 0.9


def test_spectral_gap_even_in_k(sab, sbb):
    k0, delta = sp.find_kappa0(sab)
    for k in (0.1, 0.5):
        gp = sp.spectral_gap(sab, k, kappa0=k0, delta=delta)
        gm = sp.spectral_gap(sab, -k, kappa0=k0, delta=delta)
        assert abs(gp - gm) < 1e-10
        assert gp < 0


def test_gap_at_zero_is_largest_nonzero_eigenvalue(sbb):
    gap = sp.gap_at_zero(sbb)
    vals = np.linalg.eigvalsh(sbb.sym)
    nonzero = vals[np.abs(vals) > 1e-10]
    assert gap == pytest.approx(float(np.max(nonzero)))
    assert gap < 0


def test_kappa0_bisection(sab):
    k0, delta = sp.find_kappa0(sab)
    assert k0 > 0 and delta > 0
    vals, _ = sp._eig_at_k(sab, 0.9 * k0)
    assert np.sum(np.abs(vals) < delta) == 1
    vals, _ = sp._eig_at_k(sab, 1.1 * k0)
    assert np.sum(np.abs(vals) < delta) != 1


def test_first_order_mixing_matches_eigenvector_derivative(sbb, grid_m0):
    eps = sp.first_order_mixing(sbb)
    h = 2e-3
    branches = sp.dispersion_branches(sbb, [h])
    w = grid_m0.weights
    basis = sbb.basis
    for kmode in range(3):
        b = branches[kmode]
        dv = (b.eigenvectors[1] - b.eigenvectors[0]) / h
        for j in range(3):
            if j == kmode:
                continue
            got = np.sum(w * np.conjugate(basis.E[j].values) * dv)
            want = eps[kmode, j]
            if abs(want) > 1e-6:
                assert abs(got - want) < 2e-2 * abs(want)


def test_branch_fit_reports(sbb):
    ks = np.geomspace(0.01, 0.1, 8)
    branches = sp.dispersion_branches(sbb, ks)
    A = sp.ns_coefficients(sbb)
    for j, b in enumerate(branches):
        assert abs(b.fitted["speed"] - sbb.basis.lambdas[j]) < 1e-3
        assert abs(b.fitted["second_order"] - A[j]) < 5e-3 * abs(A[j])
