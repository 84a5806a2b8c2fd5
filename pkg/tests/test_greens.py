import numpy as np
import pytest

from kinmix import GridFunction
from kinmix import greens as gr
from kinmix import spectral as sp

from conftest import wnorm


@pytest.fixture(scope="module")
def datum(grid_m0, basis):
    w = grid_m0.weights
    ED = basis.E_D.values
    micro = (grid_m0.speed2 - 3.0) * ED
    micro -= np.sum(w * ED * micro) * ED
    micro /= wnorm(grid_m0, micro)
    q = ED + 0.35 * micro
    q /= np.max(np.abs(q) * (1.0 + grid_m0.speed) ** 3)
    return gr.InitialDatum(gr.smooth_bump(), GridFunction(grid_m0, q))


@pytest.fixture(scope="module")
def ab_fields(sab, datum):
    xg = gr.XGrid(40.0, 0.1)
    return gr.evolve(sab, datum, xg, (2.5, 5.0, 10.0, 20.0))


def test_propagate_identity_at_t0(sab, grid_m0):
    rng = np.random.default_rng(30)
    f = rng.standard_normal(grid_m0.size) * np.exp(-0.2 * grid_m0.speed2)
    out = gr.propagate_fourier(sab, 0.4, 0.0, f)
    assert np.max(np.abs(out - f)) < 1e-13


def test_propagate_semigroup(sab, grid_m0):
    rng = np.random.default_rng(31)
    f = rng.standard_normal(grid_m0.size) * np.exp(-0.2 * grid_m0.speed2)
    one = gr.propagate_fourier(sab, 0.3, 3.0, f)
    two = gr.propagate_fourier(sab, 0.3, 1.25, gr.propagate_fourier(sab, 0.3, 1.75, f))
    assert np.max(np.abs(one - two)) <= 1e-9 * np.max(np.abs(one))


def test_propagate_contraction(sab, sbb, grid_m0):
    rng = np.random.default_rng(32)
    for sop in (sab, sbb):
        for _ in range(10):
            k = rng.uniform(0, 2.0)
            f = rng.standard_normal(grid_m0.size) * np.exp(-0.25 * grid_m0.speed2)
            out = gr.propagate_fourier(sop, k, rng.uniform(0.1, 5.0), f)
            assert wnorm(grid_m0, out) <= wnorm(grid_m0, f) * (1.0 + 1e-10)


def test_propagate_invalid_time(sab, grid_m0):
    with pytest.raises(ValueError):
        gr.propagate_fourier(sab, 0.1, np.nan, np.zeros(grid_m0.size))


def test_longwave_shortwave_partition(sab, datum):
    xg = gr.XGrid(30.0, 0.1)
    kappa0 = 0.6
    long_mask, short_mask = gr.longwave_shortwave_split(xg, kappa0)
    assert np.array_equal(long_mask, ~short_mask)
    full = gr.evolve(sab, datum, xg, (4.0,))[0]
    fl = gr.evolve(sab, datum, xg, (4.0,), k_mask=long_mask)[0]
    fs = gr.evolve(sab, datum, xg, (4.0,), k_mask=short_mask)[0]
    assert np.max(np.abs(fl.values + fs.values - full.values)) < 1e-13


def test_shortwave_decay_and_longwave_mass(sab, basis, datum):
    xg = gr.XGrid(30.0, 0.1)
    kappa0, _ = sp.find_kappa0(sab)
    long_mask, short_mask = gr.longwave_shortwave_split(xg, kappa0)
    t = 20.0
    f0 = gr.evolve(sab, datum, xg, (1e-9,), k_mask=short_mask)[0]
    ft = gr.evolve(sab, datum, xg, (t,), k_mask=short_mask)[0]
    sup0 = np.max(f0.lxi_norms())
    supt = np.max(ft.lxi_norms())
    # measured decay rate of the short part: at least e^{-t/C} with modest C
    assert supt < sup0 * np.exp(-t / 10.0)
    w = basis.grid.weights
    fl = gr.evolve(sab, datum, xg, (t,), k_mask=long_mask)[0]
    long_mass = np.sum(fl.values @ (w * basis.E_D.values)) * xg.dx
    full_mass = np.sum(gr.evolve(sab, datum, xg, (t,))[0].values
                       @ (w * basis.E_D.values)) * xg.dx
    assert abs(long_mass - full_mass) < 1e-6 * abs(full_mass)


def test_evolve_mass_conservation(ab_fields, basis):
    w = basis.grid.weights
    ED = basis.E_D.values
    masses = [np.sum(f.values @ (w * ED)) * f.xgrid.dx for f in ab_fields]
    assert (max(masses) - min(masses)) < 1e-8 * abs(masses[0])


def test_evolve_parseval(ab_fields):
    f = ab_fields[-1]
    w = f.grid.weights
    phys = np.sum(f.lxi_norms() ** 2) * f.xgrid.dx
    spec = np.fft.rfft(f.values, axis=0)
    n = f.xgrid.n
    mags = np.abs(spec) ** 2 @ w
    ksum = (mags[0] + 2.0 * np.sum(mags[1:-1]) + mags[-1]) * f.xgrid.dx / n
    assert abs(phys - ksum) < 1e-10 * phys


def test_evolve_norm_contraction_in_time(ab_fields):
    tot = [np.sum(f.lxi_norms() ** 2) * f.xgrid.dx for f in ab_fields]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(tot, tot[1:]))


def test_evolution_even_symmetry(ab_fields):
    # datum even in (x, xi1) jointly -> profile even in x at all times
    for f in ab_fields:
        n = f.lxi_norms()
        assert np.max(np.abs(n - n[::-1][np.r_[len(n) - 1, np.arange(len(n) - 1)]])) \
            < 1e-9 * np.max(n)


def test_aliasing_guard(sab, datum):
    with pytest.raises(gr.AliasingError):
        gr.evolve(sab, datum, gr.XGrid(30.0, 0.5), (1.0,))


def test_imaginary_residue_small(ab_fields):
    # physical fields are real by construction of the rfft pipeline
    assert all(np.isrealobj(f.values) for f in ab_fields)


def test_particle_term(op_ab, datum, grid_m0):
    x = np.linspace(-5, 5, 41)
    out0 = gr.particle_term(op_ab, datum, x, 0.0)
    expect = datum.phi(x)[:, None] * datum.q.values[None, :]
    assert np.max(np.abs(out0 - expect)) < 1e-14
    t = 3.0
    out = gr.particle_term(op_ab, datum, np.array([20.0]), t)
    vmax = np.max(np.abs(grid_m0.xi1))
    assert np.all(out[0][np.abs(20.0 - grid_m0.xi1 * t) > 1.0] == 0.0)
    far = gr.particle_term(op_ab, datum, np.array([1.0 + t * vmax + 1.0]), t)
    assert np.all(far == 0.0)


def test_particle_term_decay(op_ab, datum, grid_m0):
    w = grid_m0.weights
    pts = []
    for t in (1.0, 2.0, 4.0, 8.0):
        xs = np.linspace(0, 0.5 * t, 8)
        vals = gr.particle_term(op_ab, datum, xs, t)
        nrm = np.sqrt(np.abs(vals) ** 2 @ w)
        big = nrm > 1e-280
        pts.extend(zip(np.abs(xs[big]) + t, np.log(nrm[big])))
    A = np.array(pts)
    slope = np.polyfit(A[:, 0], A[:, 1], 1)[0]
    assert slope < -0.5          # at least e^{-(|x|+t)/C} with C <= 2


def test_profile_norms_zero_field(ab_fields, basis):
    f = ab_fields[0]
    zero = gr.SpatialField(f.xgrid, f.grid, 0.0, np.zeros_like(f.values))
    p = gr.profile_norms(zero, "full", basis)
    assert np.all(p.norms == 0.0)
    with pytest.raises(ValueError):
        gr.profile_norms(zero, "nonsense", basis)


def test_fit_waves_recovers_synthetic_exponent():
    x = np.arange(-320, 320, 0.1)
    speeds = (-1.29, 0.0, 1.29)
    profiles = []
    for t in (20.0, 40.0, 80.0, 160.0):
        y = sum((1.0 + t) ** -0.5 * np.exp(-(x - s * t) ** 2 / (2 * 2.0 * (1 + t)))
                for s in speeds)
        profiles.append(gr.ProfileCurve(x, y, "full", t))
    rep = gr.fit_waves(profiles, speeds, diffusion_scale=1.0)
    for s in speeds:
        e = rep.decay_exponents[f"speed={s:g}"]["exponent"]
        assert abs(e - (-0.5)) < 0.01


def test_fit_waves_needs_ladder():
    x = np.arange(-10, 10, 0.1)
    profiles = [gr.ProfileCurve(x, np.exp(-x**2), "full", t) for t in (1.0, 2.0)]
    with pytest.raises(ValueError, match="factor"):
        gr.fit_waves(profiles, [0.0])
