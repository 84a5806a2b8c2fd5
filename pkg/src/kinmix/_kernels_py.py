"""Pure-numpy implementations of the hot assembly kernels.

Hard-sphere closed forms, in the normalization where the collision integral
carries sigma_XY^2/pi (angular hemisphere measure rescaled so that
int_{S+} |V.n| dn -> |V|).  In these units the collision frequency is

    nu(xi) = sigma_BB^2 * int M_B(xi*) |xi - xi*| dxi*
           = sigma_BB^2/sqrt(2 pi) * (2 e^{-z^2/2} + 2 (z + 1/z) int_0^z e^{-u^2/2} du)

and the single-species kernel, cross-species kernel and cross-coupling gain
kernel are mutually consistent with it (L chi_i = 0, L_AB sqrt(M_A) = 0,
L_BA acting on the A-Maxwellian direction = 0).

An optional Cython twin (:mod:`kinmix._kernels_cy`) implements the same
functions; :mod:`kinmix.backend` picks one at import time.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ellipe, ellipk, erf, erfcx, i0e

SQRT_2PI = np.sqrt(2.0 * np.pi)

__all__ = [
    "nu_profile", "kernel_bb_points", "kernel_ab_points",
    "m0_gain_matrix", "m0_loss_phi_average", "ba_gain_matrix_m0",
    "ba_gain_matrix_3d", "ba_eqmass_gain_points", "dir_avg_coef",
]


def nu_profile(speed, sigma2: float):
    """Collision frequency nu(|xi|) for cross section factor sigma2 = sigma^2."""
    z = np.asarray(speed, dtype=float)
    I = np.sqrt(np.pi / 2.0) * erf(z / np.sqrt(2.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (sigma2 / SQRT_2PI) * (2.0 * np.exp(-0.5 * z * z) + 2.0 * (z + 1.0 / z) * I)
    # analytic limit 4 sigma^2/sqrt(2 pi) at z = 0
    small = z < 1e-12
    if np.ndim(val) == 0:
        return float(4.0 * sigma2 / SQRT_2PI) if small else float(val)
    val = np.where(small, 4.0 * sigma2 / SQRT_2PI, val)
    return val


def kernel_bb_points(sq_i, sq_j, rho, sigma2: float):
    """Two-term single-species kernel K(xi, xi*).

    sq_i, sq_j: squared speeds |xi|^2, |xi*|^2; rho: |xi - xi*| (> 0).
    """
    d = sq_i - sq_j
    gain = (2.0 / rho) * np.exp(-d * d / (8.0 * rho * rho) - rho * rho / 8.0)
    loss = 0.5 * rho * np.exp(-(sq_i + sq_j) / 4.0)
    return sigma2 / (np.pi * SQRT_2PI) * (gain - loss)


def kernel_ab_points(sq_i, sq_j, rho, mass_ratio: float, sigma2: float):
    """Cross-species kernel k^{AB}(xi, xi*) (pure gain; the loss is -nu^{AB} f)."""
    m = mass_ratio
    d = sq_j - sq_i
    pref = sigma2 * (1.0 + m) ** 2 / (4.0 * np.pi * SQRT_2PI)
    return pref / rho * np.exp(-d * d / (8.0 * rho * rho) - m * m * rho * rho / 8.0)


def dir_avg_coef(z):
    """Direction average of exp(-(xi.e)^2/2) over unit vectors e, z = |xi|."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(np.pi / 2.0) * erf(z / np.sqrt(2.0)) / z
    return np.where(z < 1e-12, 1.0, out)


def m0_gain_matrix(a, b, d2, s: float, nphi: int):
    """Azimuthal average of the gain factor exp(-d^2/(8 rho^2) - s rho^2/8)/rho.

    rho^2(phi) = a - b cos(phi); entries with a == b (the diagonal) get only the
    regularized trapezoid remainder and must be corrected by the caller.

    Returns (1/2pi) * oint [ g(rho^2)/rho ] dphi  computed as
    g(rho_min^2) * Phi0/(2pi) + trapezoid remainder, with
    Phi0 = oint dphi/rho = 4 K(2b/(a+b))/sqrt(a+b)  (complete elliptic K).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    rho2min = a - b
    diag = rho2min <= 1e-14 * a
    safe_min = np.where(diag, 1.0, rho2min)
    # d = 0 whenever rho_min = 0, so g(rho_min^2) -> 1 on the diagonal
    g0 = np.where(diag, 1.0,
                  np.exp(-d2 / (8.0 * safe_min) - s * safe_min / 8.0))
    mpar = 2.0 * b / (a + b)
    phi0 = 4.0 * ellipk(np.clip(mpar, 0.0, 1.0 - 1e-16)) / np.sqrt(a + b)
    lead = np.where(diag, 0.0, g0 * phi0 / (2.0 * np.pi))

    # midpoint rule (= shifted trapezoid, same spectral accuracy on periodic
    # integrands) so phi = 0 is never sampled on the diagonal
    phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    rem = np.zeros_like(a, dtype=float)
    for cp in np.cos(phi):
        rho2 = a - b * cp
        g = np.exp(-d2 / (8.0 * rho2) - s * rho2 / 8.0)
        rem += (g - g0) / np.sqrt(rho2)
    rem /= nphi
    return lead + rem


def m0_loss_phi_average(a, b):
    """(1/2pi) oint rho dphi = (2/pi) sqrt(a+b) E(2b/(a+b))."""
    mpar = 2.0 * np.asarray(b) / (np.asarray(a) + np.asarray(b))
    return (2.0 / np.pi) * np.sqrt(np.asarray(a) + np.asarray(b)) * ellipe(np.clip(mpar, 0.0, 1.0))


def _ba_core(eta_norm, c_par, c_perp, gamma_p, u_nodes, u_weights):
    """J = int_0^1 u exp(-g h c_par u^2 - (g h u)^2/2 + q) i0e(q) du, q = |g h c_perp u sqrt(1-u^2)|.

    All exponentials are combined so the integrand never exceeds exp(c^2/2); the
    caller multiplies by exp(-c^2/2).
    """
    gh = gamma_p * eta_norm[..., None]
    u = u_nodes
    su = np.sqrt(1.0 - u * u)
    q = np.abs(gh * c_perp[..., None]) * u * su
    E = -gh * c_par[..., None] * u * u - 0.5 * (gh * u) ** 2 + q
    np.clip(E, -745.0, 700.0, out=E)
    vals = u * np.exp(E) * i0e(q)
    return vals @ u_weights


def ba_gain_matrix_m0(x, r, mass_ratio: float, sigma2: float, nphi: int, nu_order: int):
    """Gain part of the cross-coupling operator L_BA on an m0 grid.

    Star-slot Carleman reduction: the angular collision integral reduces to a
    1D integral over u = cos(angle) with a Bessel I0 azimuthal factor, and the
    m0 entries additionally average the target node over its azimuth circle
    (midpoint rule, so the coincident point is never sampled; the kernel is
    bounded for mass_ratio != 1).
    """
    m = mass_ratio
    if abs(m - 1.0) < 1e-8:
        raise ValueError("equal-mass reduction handled separately")
    beta_b = 2.0 / (m + 1.0)             # 2 m_B/(m_A+m_B)
    gamma_p = 2.0 * m / (m - 1.0)        # beta_A/(1-beta_B), signed
    pref = (sigma2 / np.pi) * (1.0 - beta_b) ** -2 / SQRT_2PI
    n = x.size
    un, uw = np.polynomial.legendre.leggauss(nu_order)
    un = 0.5 * (un + 1.0)
    uw = 0.5 * uw
    phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    cphi, sphi = np.cos(phi), np.sin(phi)
    c2 = x * x + r * r
    out = np.empty((n, n))
    for i in range(n):
        # eta(phi) = xi_j(phi) - xi_i with xi_i = (x_i, r_i, 0)
        e1 = x[None, :] - x[i]
        e2 = r[None, :] * cphi[:, None] - r[i]
        e3 = r[None, :] * sphi[:, None]
        h = np.sqrt(e1 * e1 + e2 * e2 + e3 * e3)
        h = np.maximum(h, 1e-300)
        cpar = (x[i] * e1 + r[i] * e2) / h
        cperp = np.sqrt(np.maximum(c2[i] - cpar * cpar, 0.0))
        J = _ba_core(h, cpar, cperp, gamma_p, un, uw)
        core = np.mean(h * J, axis=0)          # phi average
        out[i] = pref * np.exp(-0.25 * c2[i] - 0.25 * m * c2) * core
    return out


def ba_gain_matrix_3d(nodes, mass_ratio: float, sigma2: float, nu_order: int):
    """Gain part of L_BA between full-3d nodes (no azimuthal average)."""
    m = mass_ratio
    if abs(m - 1.0) < 1e-8:
        raise ValueError("equal-mass reduction handled separately")
    beta_b = 2.0 / (m + 1.0)
    gamma_p = 2.0 * m / (m - 1.0)
    pref = (sigma2 / np.pi) * (1.0 - beta_b) ** -2 / SQRT_2PI
    un, uw = np.polynomial.legendre.leggauss(nu_order)
    un = 0.5 * (un + 1.0)
    uw = 0.5 * uw
    n = nodes.shape[0]
    c2 = np.sum(nodes**2, axis=1)
    out = np.empty((n, n))
    for i in range(n):
        eta = nodes - nodes[i]
        h = np.linalg.norm(eta, axis=1)
        h[i] = 1.0
        cpar = (eta @ nodes[i]) / h
        cperp = np.sqrt(np.maximum(c2[i] - cpar * cpar, 0.0))
        J = _ba_core(h, cpar, cperp, gamma_p, un, uw)
        row = pref * np.exp(-0.25 * c2[i] - 0.25 * m * c2) * h * J
        row[i] = 0.0
        out[i] = row
    return out


def ba_eqmass_gain_points(xi_i, xi_j, sigma2: float, npsi: int = 64):
    """Equal-mass L_BA gain kernel between 3-vectors xi_i (single) and rows xi_j.

    The star-slot reduction degenerates to an integral over the great circle
    perpendicular to eta = xi_j - xi_i:
    k = sigma^2/pi * e^{-(|xi_i|^2+|xi_j|^2)/4} (2pi)^{-3/2} / |eta| * oint G(xi_i . w(psi)) dpsi
    with G(s) = 1 - s sqrt(pi/2) erfcx(s/sqrt(2)).
    """
    eta = xi_j - xi_i[None, :]
    h = np.linalg.norm(eta, axis=1)
    h = np.maximum(h, 1e-300)
    e = eta / h[:, None]
    a = np.where(np.abs(e[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    u1 = np.cross(e, a)
    u1 /= np.linalg.norm(u1, axis=1, keepdims=True)
    u2 = np.cross(e, u1)
    psi = 2.0 * np.pi * (np.arange(npsi) + 0.5) / npsi
    s = (u1 @ xi_i)[:, None] * np.cos(psi)[None, :] + (u2 @ xi_i)[:, None] * np.sin(psi)[None, :]
    G = 1.0 - s * np.sqrt(np.pi / 2.0) * erfcx(s / np.sqrt(2.0))
    circ = (2.0 * np.pi / npsi) * np.sum(G, axis=1)
    sq_i = float(np.dot(xi_i, xi_i))
    sq_j = np.sum(xi_j**2, axis=1)
    return (sigma2 / np.pi) * (2.0 * np.pi) ** -1.5 \
        * np.exp(-0.25 * (sq_i + sq_j)) / h * circ
