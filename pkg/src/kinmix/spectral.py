"""Fluid modes, transport coefficients and dispersion branches.

The discrete operators carry their null spaces to roundoff; for spectral and
evolution work they are additionally deflated (projected onto the orthogonal
complement of the conserved directions), which pins the fluid branches at
sigma(0) = 0 exactly and keeps all eigenvalue real parts non-positive.

Dispersion branches of -ik xi1 + L are computed by dense eigensolves of the
weight-symmetrized (complex symmetric) matrix and continued in k by maximal
eigenvector overlap, with the known k -> 0 limits (the Euler modes E_j, or
the diffusion mode E_D) used to label branches.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .config import MixtureConfig
from .grid import VelocityGrid, GridFunction, inner_product
from .operators import CollisionOperator

LAMBDA_SOUND = float(np.sqrt(5.0 / 3.0))


@dataclass
class FluidBasis:
    """Orthonormal collision invariants and Euler characteristic modes."""

    grid: VelocityGrid
    config: MixtureConfig
    chi: dict                     # index -> GridFunction (0,1,4 on m0; +2,3 on 3d)
    E: list                       # the three Euler modes, w-orthonormal
    lambdas: tuple = (-LAMBDA_SOUND, 0.0, LAMBDA_SOUND)
    E_D: GridFunction = None

    def chi_matrix(self) -> np.ndarray:
        return np.stack([self.chi[i].values for i in sorted(self.chi)], axis=1)


def fluid_modes(grid: VelocityGrid, config: MixtureConfig) -> FluidBasis:
    """Build chi_i, the Euler modes E_j, and the normalized diffusion mode E_D."""
    w = grid.weights
    sqM = grid.sqrt_maxwellian(1.0)
    chi = {0: sqM, 1: grid.xi1 * sqM, 4: (grid.speed2 - 3.0) / np.sqrt(6.0) * sqM}
    if grid.mode == "full3d":
        chi[2] = grid.nodes[:, 1] * sqM
        chi[3] = grid.nodes[:, 2] * sqM
    # exact discrete orthonormalization (the quadrature already gives ~1e-15)
    ordered = sorted(chi)
    vecs = []
    for i in ordered:
        v = chi[i].astype(float).copy()
        for u in vecs:
            v -= np.sum(w * u * v) * u
        vecs.append(v / np.sqrt(np.sum(w * v * v)))
    chi = {i: GridFunction(grid, v) for i, v in zip(ordered, vecs)}
    c0, c1, c4 = chi[0].values, chi[1].values, chi[4].values
    E_raw = [np.sqrt(1.5) * c0 - np.sqrt(2.5) * c1 + c4,
             -np.sqrt(2.0 / 3.0) * c0 + c4,
             np.sqrt(1.5) * c0 + np.sqrt(2.5) * c1 + c4]
    E = []
    for v in E_raw:
        E.append(GridFunction(grid, v / np.sqrt(np.sum(w * v * v))))
    ED = grid.sqrt_maxwellian(config.mass_ratio)
    ED = ED / np.sqrt(np.sum(w * ED**2))
    return FluidBasis(grid, config, chi, E, E_D=GridFunction(grid, ED))


def kernel_vectors(pair: str, basis: FluidBasis) -> np.ndarray:
    """w-orthonormal discrete null vectors of the BB or AB operator, as columns."""
    if pair == "BB":
        return basis.chi_matrix()
    return basis.E_D.values[:, None]


def project(f: GridFunction, which: str, basis: FluidBasis) -> GridFunction:
    """Orthogonal projections P0/P1 (Euler macro space) and P0D/P1D (diffusion)."""
    w = basis.grid.weights
    vals = f.values
    if which in ("P0", "P1"):
        cols = [basis.chi[i].values for i in sorted(basis.chi)]
    elif which in ("P0D", "P1D"):
        cols = [basis.E_D.values]
    else:
        raise ValueError(f"unknown projector {which!r}")
    macro = np.zeros_like(vals)
    for c in cols:
        macro = macro + np.sum(w * c * vals) * c
    if which in ("P0", "P0D"):
        return GridFunction(basis.grid, macro)
    return GridFunction(basis.grid, vals - macro)


def deflated_matrix(op: CollisionOperator, basis: FluidBasis,
                    symmetric: bool = False) -> np.ndarray:
    """Pi M Pi with Pi the projector off the operator's conserved directions.

    In the symmetric (W^{1/2}-conjugated) coordinates the projector sandwich
    keeps the matrix symmetric; eigenvalues are shared with the plain form.
    """
    w = op.grid.weights
    sw = np.sqrt(w)
    U = kernel_vectors(op.pair, basis) * sw[:, None]      # orthonormal columns
    S = op.symmetric_matrix()
    SU = S @ U
    S = S - SU @ U.T - U @ SU.T + U @ (U.T @ SU) @ U.T
    if symmetric:
        return 0.5 * (S + S.T)
    return (S / sw[:, None]) * sw[None, :]


@dataclass
class SpectralOperator:
    """Operator bundle prepared for spectral / evolution work."""

    op: CollisionOperator
    basis: FluidBasis
    matrix: np.ndarray            # deflated applied matrix
    sym: np.ndarray               # deflated symmetric form
    n_tracked: int

    @property
    def grid(self):
        return self.op.grid


def prepare(op: CollisionOperator, basis: FluidBasis) -> SpectralOperator:
    sym = deflated_matrix(op, basis, symmetric=True)
    sw = np.sqrt(op.grid.weights)
    mat = (sym / sw[:, None]) * sw[None, :]
    return SpectralOperator(op, basis, mat, sym, 3 if op.pair == "BB" else 1)


def _micro_solve(sop: SpectralOperator, rhs: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Solve Op x = rhs on the orthogonal complement of the kernel."""
    grid = sop.grid
    w = grid.weights
    sw = np.sqrt(w)
    U = kernel_vectors(sop.op.pair, sop.basis) * sw[:, None]
    b = sw * rhs
    overlap = U.T @ b
    if np.linalg.norm(overlap) > tol * max(np.linalg.norm(b), 1e-300):
        raise ValueError("right-hand side has a kernel component above tolerance")
    b = b - U @ overlap
    # shift the (deflated, exactly zero) kernel directions to make the solve regular
    A = sop.sym - U @ U.T
    x = sla.solve(A, b, assume_a="sym")
    x = x - U @ (U.T @ x)
    return x / sw


def invert_on_micro(sop: SpectralOperator, rhs: GridFunction) -> GridFunction:
    """x with Op x = P1 rhs, x orthogonal to the operator kernel."""
    vals = np.asarray(rhs.values, dtype=float)
    return GridFunction(sop.grid, _micro_solve(sop, vals))


@dataclass
class TransportCoefficients:
    A: tuple                      # (A1, A2, A3), all negative
    a2: float
    epsilon_jk: np.ndarray        # first-order eigenvector mixing, 3x3 complex
    eD_prime: np.ndarray          # e_D'(0) = i L_AB^{-1} xi1 E_D (complex values)


def ns_coefficients(sop_bb: SpectralOperator) -> tuple:
    """A_j = (P1 xi1 E_j, L^{-1} P1 xi1 E_j) for the three Euler modes."""
    basis = sop_bb.basis
    w = sop_bb.grid.weights
    out = []
    for j in range(3):
        rhs = project(GridFunction(sop_bb.grid, sop_bb.grid.xi1 * basis.E[j].values),
                      "P1", basis)
        x = _micro_solve(sop_bb, rhs.values)
        out.append(float(np.sum(w * rhs.values * x)))
    return tuple(out)


def diffusion_coefficient(sop_ab: SpectralOperator) -> float:
    """a2 = -(xi1 E_D, L_AB^{-1} P1D xi1 E_D) > 0."""
    basis = sop_ab.basis
    grid = sop_ab.grid
    w = grid.weights
    ED = basis.E_D.values
    rhs = grid.xi1 * ED
    rhs = rhs - np.sum(w * ED * rhs) * ED
    x = _micro_solve(sop_ab, rhs)
    return float(-np.sum(w * rhs * x))


def first_order_mixing(sop_bb: SpectralOperator) -> np.ndarray:
    """epsilon_k^j = -i (E_j, P0 xi1 L^{-1} P1 xi1 E_k)/(lambda_j - lambda_k)."""
    basis = sop_bb.basis
    grid = sop_bb.grid
    w = grid.weights
    lam = basis.lambdas
    eps = np.zeros((3, 3), dtype=complex)
    for k in range(3):
        rhs = project(GridFunction(grid, grid.xi1 * basis.E[k].values), "P1", basis)
        x = _micro_solve(sop_bb, rhs.values)
        for j in range(3):
            if j == k:
                continue
            val = np.sum(w * basis.E[j].values * grid.xi1 * x)
            eps[k, j] = -1j * val / (lam[j] - lam[k])
    return eps


def transport_coefficients(sop_bb: SpectralOperator,
                           sop_ab: SpectralOperator) -> TransportCoefficients:
    A = ns_coefficients(sop_bb)
    a2 = diffusion_coefficient(sop_ab)
    eps = first_order_mixing(sop_bb)
    grid = sop_ab.grid
    basis = sop_ab.basis
    rhs = grid.xi1 * basis.E_D.values
    rhs -= np.sum(grid.weights * basis.E_D.values * rhs) * basis.E_D.values
    eD_prime = 1j * _micro_solve(sop_ab, rhs)
    return TransportCoefficients(A, a2, eps, eD_prime)


# ---------------------------------------------------------------------------
# dispersion branches
# ---------------------------------------------------------------------------

@dataclass
class SpectralBranch:
    k_values: np.ndarray
    eigenvalues: np.ndarray       # complex sigma(k)
    eigenvectors: np.ndarray      # (nk, N), w-normalized, phase-continuous
    fitted: dict = field(default_factory=dict)

    def fit_expansion(self, kmax_fit: float = 0.12):
        """Least-squares sigma(k) ~ -i lam k + A k^2 (+ c3 k^3) on small k."""
        sel = (self.k_values > 0) & (self.k_values <= kmax_fit)
        k = self.k_values[sel]
        s = self.eigenvalues[sel]
        M = np.stack([-1j * k, k**2, k**3], axis=1)
        coef, *_ = np.linalg.lstsq(M, s, rcond=None)
        self.fitted = {"speed": float(coef[0].real),
                       "second_order": float(coef[1].real),
                       "cubic_bound": float(abs(coef[2]))}
        return self.fitted


def _eig_at_k(sop: SpectralOperator, k: float):
    sw = np.sqrt(sop.grid.weights)
    A = sop.sym.astype(complex) - 1j * k * np.diag(sop.grid.xi1)
    vals, vecs = sla.eig(A)
    # back to plain coordinates, w-normalized
    vecs = vecs / sw[:, None]
    nrm = np.sqrt(np.sum(sop.grid.weights[:, None] * np.abs(vecs) ** 2, axis=0))
    return vals, vecs / nrm[None, :]


def dispersion_branches(sop: SpectralOperator, k_list, n_tracked: int | None = None,
                        overlap_floor: float = 0.5) -> list:
    """Track the n slowest branches of -ik xi1 + Op from k ~ 0 upward."""
    n_tracked = sop.n_tracked if n_tracked is None else n_tracked
    ks = np.sort(np.asarray(k_list, dtype=float))
    if ks[0] <= 0:
        raise ValueError("k_list must be positive (sigma(0) = 0 is appended)")
    w = sop.grid.weights
    if sop.op.pair == "BB":
        refs = [E.values.astype(complex) for E in sop.basis.E]
    else:
        refs = [sop.basis.E_D.values.astype(complex)]
    refs = refs[:n_tracked]
    branches = [SpectralBranch(np.concatenate([[0.0], ks]),
                               np.zeros(len(ks) + 1, dtype=complex),
                               np.zeros((len(ks) + 1, sop.grid.size), dtype=complex))
                for _ in range(n_tracked)]
    for b, r in zip(branches, refs):
        b.eigenvectors[0] = r
    current = [r.copy() for r in refs]
    for ik, k in enumerate(ks):
        vals, vecs = _eig_at_k(sop, k)
        ov = np.abs(np.conjugate(current) @ (w[:, None] * vecs))   # (ntracked, N)
        taken = set()
        for j in range(n_tracked):
            order = np.argsort(-ov[j])
            pick = next(i for i in order if i not in taken)
            if ov[j, pick] < overlap_floor:
                raise RuntimeError(f"branch tracking ambiguous at k={k:.4g} "
                                   f"(overlap {ov[j, pick]:.3f})")
            taken.add(pick)
            v = vecs[:, pick]
            phase = np.sum(w * np.conjugate(current[j]) * v)
            v = v * (np.conjugate(phase) / abs(phase))
            branches[j].eigenvalues[ik + 1] = vals[pick]
            branches[j].eigenvectors[ik + 1] = v
            current[j] = v
    for b in branches:
        b.fit_expansion()
    return branches


def curvature_fd(sop: SpectralOperator, branch: int = 0, h: float = 0.02) -> float:
    """lambda''(0) of a tracked slow branch by 5-point central differences.

    Conjugation symmetry sigma(-k) = conj(sigma(k)) reduces the stencil to the
    two eigensolves at k = h and 2h (Re sigma is even, sigma(0) = 0 exactly).
    """
    brs = dispersion_branches(sop, [h, 2.0 * h])
    b = brs[branch]
    s1, s2 = b.eigenvalues[1], b.eigenvalues[2]
    return float((-2.0 * s2.real + 32.0 * s1.real) / (12.0 * h * h))


def spectral_gap(sop: SpectralOperator, k: float, kappa0: float | None = None,
                 delta: float | None = None) -> float:
    """Most positive real part of the non-tracked spectrum of -ik xi1 + Op.

    For |k| <= kappa0 the n_tracked eigenvalues nearest zero (the fluid or
    diffusion branches) are excluded; beyond kappa0 all eigenvalues count.
    """
    vals, _ = _eig_at_k(sop, k)
    if kappa0 is None or abs(k) <= kappa0:
        drop = min(sop.n_tracked, len(vals))
        if delta is not None:
            close = np.abs(vals) < delta
            if close.sum() >= drop:
                vals = vals[~close]
            else:
                vals = np.delete(vals, np.argsort(np.abs(vals))[:drop])
        else:
            vals = np.delete(vals, np.argsort(np.abs(vals))[:drop])
    return float(np.max(vals.real))


def gap_at_zero(sop: SpectralOperator) -> float:
    """Largest nonzero eigenvalue of the deflated collision operator."""
    vals = np.linalg.eigvalsh(sop.sym)
    nonzero = vals[np.abs(vals) > 1e-10]
    return float(np.max(nonzero))


def find_kappa0(sop: SpectralOperator, k_hi: float = 2.0, tol: float = 1e-3):
    """Largest k below which exactly n_tracked eigenvalues lie within delta of 0.

    delta is fixed at half the k = 0 spectral gap; the boundary is located by
    bisection.  Returns (kappa0, delta).
    """
    delta = 0.5 * abs(gap_at_zero(sop))
    n_want = sop.n_tracked

    def count(k):
        vals, _ = _eig_at_k(sop, k)
        return int(np.sum(np.abs(vals) < delta))

    lo = 1e-4
    if count(lo) != n_want:
        raise RuntimeError("unexpected slow-mode count near k = 0")
    hi = k_hi
    while count(hi) == n_want:
        hi *= 2.0
        if hi > 64:
            return float(hi), float(delta)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count(mid) == n_want:
            lo = mid
        else:
            hi = mid
    return float(lo), float(delta)
