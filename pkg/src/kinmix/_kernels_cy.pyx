# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot assembly kernels (see _kernels_py for the math)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, exp, fabs, sqrt, M_PI
cimport scipy.special.cython_special as cs

cnp.import_array()


def m0_gain_matrix(a_in, b_in, d2_in, double s, int nphi):
    cdef double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef double[:, ::1] d2 = np.ascontiguousarray(d2_in, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((n, n))
    cdef double[:, ::1] out = out_arr
    cdef cnp.ndarray[double, ndim=1] cphi_arr = \
        np.cos(2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi)
    cdef double[::1] cphi = cphi_arr
    cdef Py_ssize_t i, j, p
    cdef double aa, bb, dd, rho2min, g0, mpar, phi0, lead, rem, rho2, g
    cdef double two_pi = 2.0 * M_PI
    for i in range(n):
        for j in range(n):
            aa = a[i, j]; bb = b[i, j]; dd = d2[i, j]
            rho2min = aa - bb
            if rho2min <= 1e-14 * aa:
                g0 = 1.0
                lead = 0.0
            else:
                g0 = exp(-dd / (8.0 * rho2min) - s * rho2min / 8.0)
                mpar = 2.0 * bb / (aa + bb)
                if mpar > 1.0 - 1e-16:
                    mpar = 1.0 - 1e-16
                elif mpar < 0.0:
                    mpar = 0.0
                phi0 = 4.0 * cs.ellipk(mpar) / sqrt(aa + bb)
                lead = g0 * phi0 / two_pi
            rem = 0.0
            for p in range(nphi):
                rho2 = aa - bb * cphi[p]
                g = exp(-dd / (8.0 * rho2) - s * rho2 / 8.0)
                rem += (g - g0) / sqrt(rho2)
            out[i, j] = lead + rem / nphi
    return out_arr


cdef double _ba_core_scalar(double h, double cpar, double cperp, double gamma_p,
                            double[::1] un, double[::1] uw,
                            double[::1] su) nogil:
    cdef Py_ssize_t k, nu = un.shape[0]
    cdef double gh = gamma_p * h
    cdef double q, E, acc = 0.0, u
    for k in range(nu):
        u = un[k]
        q = fabs(gh * cperp) * u * su[k]
        E = -gh * cpar * u * u - 0.5 * (gh * u) * (gh * u) + q
        if E < -745.0:
            continue
        if E > 700.0:
            E = 700.0
        acc += uw[k] * u * exp(E) * cs.i0e(q)
    return acc


def ba_gain_matrix_m0(x_in, r_in, double mass_ratio,
                      double sigma2, int nphi, int nu_order):
    if abs(mass_ratio - 1.0) < 1e-8:
        raise ValueError("equal-mass reduction handled separately")
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] r = np.ascontiguousarray(r_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef double m = mass_ratio
    cdef double beta_b = 2.0 / (m + 1.0)
    cdef double gamma_p = 2.0 * m / (m - 1.0)
    cdef double pref = (sigma2 / M_PI) / ((1.0 - beta_b) ** 2) / sqrt(2.0 * M_PI)
    un_np, uw_np = np.polynomial.legendre.leggauss(nu_order)
    un_np = np.ascontiguousarray(0.5 * (un_np + 1.0))
    uw_np = np.ascontiguousarray(0.5 * uw_np)
    su_np = np.sqrt(1.0 - un_np * un_np)
    cdef double[::1] un = un_np, uw = uw_np, su = su_np
    phi_np = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    cdef double[::1] cphi = np.ascontiguousarray(np.cos(phi_np))
    cdef double[::1] sphi = np.ascontiguousarray(np.sin(phi_np))
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((n, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, p
    cdef double c2i, c2j, e1, e2, e3, h, cpar, cperp, acc, J
    for i in range(n):
        c2i = x[i] * x[i] + r[i] * r[i]
        for j in range(n):
            c2j = x[j] * x[j] + r[j] * r[j]
            acc = 0.0
            for p in range(nphi):
                e1 = x[j] - x[i]
                e2 = r[j] * cphi[p] - r[i]
                e3 = r[j] * sphi[p]
                h = sqrt(e1 * e1 + e2 * e2 + e3 * e3)
                if h < 1e-300:
                    continue
                cpar = (x[i] * e1 + r[i] * e2) / h
                cperp = c2i - cpar * cpar
                cperp = sqrt(cperp) if cperp > 0.0 else 0.0
                J = _ba_core_scalar(h, cpar, cperp, gamma_p, un, uw, su)
                acc += h * J
            out[i, j] = pref * exp(-0.25 * c2i - 0.25 * m * c2j) * acc / nphi
    return out_arr


def ba_gain_matrix_3d(nodes_in, double mass_ratio, double sigma2,
                      int nu_order):
    if abs(mass_ratio - 1.0) < 1e-8:
        raise ValueError("equal-mass reduction handled separately")
    cdef double[:, ::1] nodes = np.ascontiguousarray(nodes_in, dtype=np.float64)
    cdef Py_ssize_t n = nodes.shape[0]
    cdef double m = mass_ratio
    cdef double beta_b = 2.0 / (m + 1.0)
    cdef double gamma_p = 2.0 * m / (m - 1.0)
    cdef double pref = (sigma2 / M_PI) / ((1.0 - beta_b) ** 2) / sqrt(2.0 * M_PI)
    un_np, uw_np = np.polynomial.legendre.leggauss(nu_order)
    un_np = np.ascontiguousarray(0.5 * (un_np + 1.0))
    uw_np = np.ascontiguousarray(0.5 * uw_np)
    su_np = np.sqrt(1.0 - un_np * un_np)
    cdef double[::1] un = un_np, uw = uw_np, su = su_np
    cdef cnp.ndarray[double, ndim=2] out_arr = np.empty((n, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double c2i, c2j, e1, e2, e3, h, cpar, cperp, J
    for i in range(n):
        c2i = nodes[i, 0] ** 2 + nodes[i, 1] ** 2 + nodes[i, 2] ** 2
        for j in range(n):
            if i == j:
                out[i, j] = 0.0
                continue
            c2j = nodes[j, 0] ** 2 + nodes[j, 1] ** 2 + nodes[j, 2] ** 2
            e1 = nodes[j, 0] - nodes[i, 0]
            e2 = nodes[j, 1] - nodes[i, 1]
            e3 = nodes[j, 2] - nodes[i, 2]
            h = sqrt(e1 * e1 + e2 * e2 + e3 * e3)
            cpar = (nodes[i, 0] * e1 + nodes[i, 1] * e2 + nodes[i, 2] * e3) / h
            cperp = c2i - cpar * cpar
            cperp = sqrt(cperp) if cperp > 0.0 else 0.0
            J = _ba_core_scalar(h, cpar, cperp, gamma_p, un, uw, su)
            out[i, j] = pref * exp(-0.25 * c2i - 0.25 * m * c2j) * h * J
    return out_arr
