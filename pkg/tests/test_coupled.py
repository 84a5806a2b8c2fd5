import numpy as np
import pytest

from kinmix import GridFunction
from kinmix import coupled as cp
from kinmix import greens as gr
from kinmix.operators import CollisionOperator

from conftest import wnorm

LAM = np.sqrt(5.0 / 3.0)


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
def states(sab, sbb, op_ba, datum):
    xg = gr.XGrid(72.0, 0.1)
    return cp.solve_coupled(sab, sbb, op_ba, datum, None, xg,
                            (5.0, 10.0, 20.0, 40.0))


def test_duhamel_oracle(sab, sbb, op_ba, grid_m0):
    """Block exponential vs composite-Simpson Duhamel (64 subintervals).

    Agreement is measured in the discrete L^2_xi norm relative to the initial
    data scale; the Simpson rule's own O(h^4) error at 64 subintervals sits at
    ~5e-7 on this scale for long-wave k.
    """
    rng = np.random.default_rng(40)
    w = grid_m0.weights
    for k in rng.uniform(0.02, 0.2, 3):
        g0 = rng.standard_normal(grid_m0.size) * np.exp(-0.3 * grid_m0.speed2)
        h0 = rng.standard_normal(grid_m0.size) * np.exp(-0.3 * grid_m0.speed2)
        ref = cp.duhamel_reference(sab, sbb, op_ba, k, 10.0, g0, h0)
        blk = cp.block_exponential_h(sab, sbb, op_ba, k, 10.0, g0, h0)
        err = np.sqrt(np.sum(w * np.abs(ref - blk) ** 2))
        scale = np.sqrt(np.sum(w * (g0**2 + h0**2)))
        assert err <= 1e-6 * scale


def test_triangular_structure(sab, sbb, op_ba, datum, grid_m0, basis):
    xg = gr.XGrid(30.0, 0.1)
    w = grid_m0.weights
    ED = basis.E_D.values
    other = gr.InitialDatum(gr.smooth_bump(0.3, 8),
                            GridFunction(grid_m0, grid_m0.xi1 * ED))
    s1 = cp.solve_coupled(sab, sbb, op_ba, datum, None, xg, (4.0,))
    s2 = cp.solve_coupled(sab, sbb, op_ba, datum, other, xg, (4.0,))
    assert np.array_equal(s1[0].g.values, s2[0].g.values)
    assert not np.allclose(s1[0].h.values, s2[0].h.values)


def test_lba_zeroed_decouples(sab, sbb, op_ba, datum, grid_m0):
    xg = gr.XGrid(30.0, 0.1)
    zero_ba = CollisionOperator("BA", grid_m0, np.zeros(grid_m0.size),
                                np.zeros((grid_m0.size, grid_m0.size)))
    hdatum = gr.InitialDatum(datum.phi, datum.q)
    st = cp.solve_coupled(sab, sbb, zero_ba, datum, hdatum, xg, (4.0,))
    hb = gr.evolve(sbb, hdatum, xg, (4.0,))
    assert np.max(np.abs(st[0].h.values - hb[0].values)) \
        < 1e-12 * np.max(np.abs(hb[0].values))


def test_conserved_quantities_flat(states, basis, config):
    ledger = [cp.conserved_quantities(s, basis, config) for s in states]
    scale = abs(ledger[0]["A_mass"])
    for key in ("A_mass", "B_mass", "momentum", "energy"):
        vals = [l[key] for l in ledger]
        assert max(vals) - min(vals) < 1e-8 * max(scale, max(abs(v) for v in vals))


def test_h_develops_three_humps(states, basis):
    s = states[-1]
    prof = gr.profile_norms(s.h, "full", basis)
    dx = s.h.xgrid.dx
    for speed in (-LAM, 0.0, LAM):
        c0 = speed * s.t
        sel = np.abs(prof.x - c0) < 6.0
        i = np.argmax(prof.norms[sel])
        xloc = prof.x[sel][i]
        # a local maximum of the profile lives within 2 dx of the characteristic
        assert abs(xloc - c0) < 4.0
        j = np.argmin(np.abs(prof.x - xloc))
        assert prof.norms[j] >= prof.norms[j - 1] - 1e-18
        assert prof.norms[j] >= prof.norms[j + 1] - 1e-18


def test_g_single_hump_at_origin(states, basis, sab):
    from kinmix.spectral import diffusion_coefficient
    a2 = diffusion_coefficient(sab)
    for s in states[1:]:
        prof = gr.profile_norms(s.g, "full", basis)
        h = gr.fit_hump(prof, 0.0, a2)
        assert h is not None
        assert abs(h["center"]) < 2.0 * s.g.xgrid.dx


def test_cancellation_residual_value(op_ba, op_ba_raw, basis, grid_m0):
    corr = cp.cancellation_residual(op_ba, basis)
    raw = cp.cancellation_residual(op_ba_raw, basis)
    sw = np.sqrt(grid_m0.weights)
    opnorm = np.linalg.norm((sw[:, None] * op_ba.matrix()) / sw[None, :], 2)
    assert corr <= 1e-6 * opnorm
    assert raw > corr            # the correction genuinely removes a defect


def test_resonance_report(sab, op_ba, basis):
    rep = cp.resonance_coefficients(sab, op_ba, basis)
    c1, c3 = rep.e13_coefficients
    assert rep.e2_coefficient <= 1e-6 * (abs(c1) + abs(c3) + 1e-12)
    assert abs(c1) > 10.0 * rep.e2_coefficient
    assert abs(c3) > 10.0 * rep.e2_coefficient
    assert rep.oddness_defect <= 1e-6


def test_conservation_identity_residual(op_ab, op_ba, config):
    resid = cp.conservation_identity_residual(op_ab, op_ba, config)
    assert resid <= 1e-6


def test_verify_main_theorem_structure(states, basis, config, sab, sbb):
    from kinmix.spectral import diffusion_coefficient, ns_coefficients
    a2 = diffusion_coefficient(sab)
    A2 = ns_coefficients(sbb)[1]
    reso = cp.resonance_coefficients(sab, states and None or None, basis) \
        if False else cp.ResonanceReport(0.0, 0.0, (1.0, 1.0), 0.0)
    doc = cp.verify_main_theorem(states, basis, config, a2, A2, reso)
    assert "slope_vs_sqrt_t" in doc["in_cone_residual"]
    assert doc["in_cone_residual"]["slope_vs_sqrt_t"] < 0
    exps = doc["g"]["decay_exponents"]
    assert "speed=0" in exps
