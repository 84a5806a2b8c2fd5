"""Verification suites wired to the module invariants (CLI `verify`)."""
from __future__ import annotations

import numpy as np

from . import coupled as cp
from . import spectral as sp
from .config import RunConfig
from .grid import GridFunction, build_grid, inner_product, restrict_subspace
from .operators import operator_diagnostics
from .pipeline import Pipeline, build_pipeline
from .reports import VerificationReport

SUITES = ("grid", "operators", "conservation", "spectral")


def run_suite(name: str, cfg: RunConfig, pipe: Pipeline | None = None) -> VerificationReport:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r} (available: {', '.join(SUITES)})")
    rep = VerificationReport(name, cfg.hash())
    if name == "grid":
        _suite_grid(rep, cfg)
        return rep
    if pipe is None:
        pipe = build_pipeline(cfg, with_ba=name in ("conservation",))
    if name == "operators":
        _suite_operators(rep, cfg, pipe)
    elif name == "conservation":
        _suite_conservation(rep, cfg, pipe)
    elif name == "spectral":
        _suite_spectral(rep, cfg, pipe)
    return rep


def _suite_grid(rep: VerificationReport, cfg: RunConfig):
    mix = cfg.mixture
    grid = build_grid(mix, cfg.grid.mode, cfg.grid.resolution)
    w, M = grid.weights, grid.maxwellian(1.0)
    moments = {
        "mass": (np.sum(w * M), 1.0),
        "xi1_sq": (np.sum(w * grid.xi1**2 * M), 1.0),
        "xi1_quartic": (np.sum(w * grid.xi1**4 * M), 3.0),
        "speed_quartic": (np.sum(w * grid.speed2**2 * M), 15.0),
        "odd": (np.sum(w * grid.xi1 * M), 0.0),
    }
    for mid, (got, want) in moments.items():
        rep.add(f"grid.moment.{mid}", f"Maxwellian moment {mid} vs closed form",
                abs(got - want), 1e-10)
    rng = np.random.default_rng(cfg.seed)
    worst = np.inf
    for _ in range(20):
        f = GridFunction(grid, rng.standard_normal(grid.size))
        worst = min(worst, float(inner_product(f, f).real))
    rep.add("grid.posdef", "inner product positive on nonzero functions",
            worst, 0.0, comparison="ge")
    g3 = build_grid(mix, "full3d", (7, 7, 7))
    f = GridFunction(g3, rng.standard_normal(g3.size))
    p1 = restrict_subspace(f)
    p2 = restrict_subspace(p1)
    rep.add("grid.restrict.idempotent", "restriction projector idempotent",
            float(np.max(np.abs(p1.values - p2.values))), 1e-12)
    g = GridFunction(g3, rng.standard_normal(g3.size))
    lhs = inner_product(restrict_subspace(f), g)
    rhs = inner_product(f, restrict_subspace(g))
    rep.add("grid.restrict.selfadjoint", "restriction projector self-adjoint",
            abs(lhs - rhs), 1e-12)


def _suite_operators(rep: VerificationReport, cfg: RunConfig, pipe: Pipeline):
    tol = cfg.tolerances
    for op in (pipe.bb, pipe.ab):
        diag = operator_diagnostics(op, cfg.mixture, seed=cfg.seed)
        for cname, val in diag.kernel_residuals.items():
            rep.add(f"op.{op.pair}.null.{cname}",
                    f"{op.pair} null-space residual of {cname}",
                    val, tol["nullspace"])
        rep.add(f"op.{op.pair}.symmetry", f"{op.pair} weighted kernel symmetry",
                diag.symmetry_defect, tol["selfadjoint"])
        rep.add(f"op.{op.pair}.negativity", f"{op.pair} micro Rayleigh quotient <= 0",
                diag.negativity_margin, 0.0)
        rep.add(f"op.{op.pair}.nu0", f"{op.pair} empirical coercivity nu0 > 0",
                diag.nu0, 0.0, comparison="ge")
    # self-adjointness in the discrete pairing over random pairs
    rng = np.random.default_rng(cfg.seed + 1)
    grid = pipe.grid
    w = grid.weights
    for op in (pipe.bb, pipe.ab):
        M = op.matrix()
        worst = 0.0
        for _ in range(20):
            f = rng.standard_normal(grid.size) * np.exp(-0.25 * grid.speed2)
            g = rng.standard_normal(grid.size) * np.exp(-0.25 * grid.speed2)
            d = abs(np.sum(w * (M @ f) * g) - np.sum(w * f * (M @ g)))
            worst = max(worst, d / (np.sqrt(np.sum(w * f**2) * np.sum(w * g**2))))
        rep.add(f"op.{op.pair}.selfadjoint", f"{op.pair} (Lf,g) = (f,Lg)",
                worst, tol["selfadjoint"])


def _suite_conservation(rep: VerificationReport, cfg: RunConfig, pipe: Pipeline):
    tol = cfg.tolerances
    grid = pipe.grid
    w = grid.weights
    mix = cfg.mixture
    canc = cp.cancellation_residual(pipe.ba, pipe.basis)
    sw = np.sqrt(w)
    opnorm = float(np.linalg.norm((sw[:, None] * pipe.ba.matrix()) / sw[None, :], 2))
    rep.add("ba.cancellation", "|L_BA E_D| <= tol |L_BA|",
            canc, tol["cancellation"] * opnorm)
    resid = cp.conservation_identity_residual(pipe.ab, pipe.ba, mix, seed=cfg.seed)
    rep.add("ba.exchange_balance", "collision exchange balance residual",
            resid, tol["conservation"])
    reso = cp.resonance_coefficients(pipe.sab, pipe.ba, pipe.basis, seed=cfg.seed)
    c1, c3 = reso.e13_coefficients
    rep.add("ba.resonance_c2", "|c2| <= 1e-6 (|c1|+|c3|)",
            reso.e2_coefficient, 1e-6 * (abs(c1) + abs(c3) + 1e-12))
    rep.add("ba.oddness", "oddness defect of L_BA L_AB^{-1}",
            reso.oddness_defect, tol["conservation"])


def _suite_spectral(rep: VerificationReport, cfg: RunConfig, pipe: Pipeline):
    grid = pipe.grid
    w = grid.weights
    basis = pipe.basis
    T = np.array([[np.sum(w * basis.E[i].values * grid.xi1 * basis.E[j].values)
                   for j in range(3)] for i in range(3)])
    lam = np.sort(np.linalg.eigvalsh(T))
    target = np.array([-sp.LAMBDA_SOUND, 0.0, sp.LAMBDA_SOUND])
    rep.add("spec.sound_speeds", "eigenvalues of P0 xi1 P0 vs +-sqrt(5/3), 0",
            float(np.max(np.abs(lam - target))), 1e-10)
    A = sp.ns_coefficients(pipe.sbb)
    a2 = sp.diffusion_coefficient(pipe.sab)
    rep.add("spec.A1_eq_A3", "A1 = A3 (relative)",
            abs(A[0] - A[2]) / abs(A[0]), 1e-8)
    rep.add("spec.A_negative", "max A_j < 0", max(A), 0.0)
    rep.add("spec.a2_positive", "a2 > 0", a2, 0.0, comparison="ge")
    lam2 = sp.curvature_fd(pipe.sab)
    rep.add("spec.a2_curvature", "|(-2 a2) - lambda''(0)| / (2 a2)",
            abs(-2.0 * a2 - lam2) / (2.0 * a2), 1e-3)
    lamB = sp.curvature_fd(pipe.sbb, branch=1)
    rep.add("spec.A2_curvature", "|2 A2 - sigma_2''(0)| / |2 A2|",
            abs(2.0 * A[1] - lamB) / abs(2.0 * A[1]), 1e-3)
    worst = -np.inf
    for k in (0.05, 0.2, 0.8):
        vals, _ = sp._eig_at_k(pipe.sab, k)
        worst = max(worst, float(np.max(vals.real)))
        vals, _ = sp._eig_at_k(pipe.sbb, k)
        worst = max(worst, float(np.max(vals.real)))
    rep.add("spec.re_nonpositive", "max Re sigma over sample k", worst, 1e-10)
