"""Command-line interface.

Subcommands: grid, assemble, modes, dispersion, coeffs, evolve, couple,
verify.  Exit codes: 0 success, 2 configuration/usage error, 3 failed
verification suite, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import coupled as cp
from . import greens as gr
from . import spectral as sp
from .config import ConfigError, RunConfig, load_config
from .grid import GridFunction, build_grid
from .operators import operator_diagnostics
from .pipeline import build_pipeline
from .reports import emit_csv, emit_json, environment_fingerprint
from .verify import SUITES, run_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_NUMERICAL = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinmix",
                                description="hard-sphere binary mixture kinetics")
    p.add_argument("--config", help="JSON run configuration (schema 1)")
    p.add_argument("--output-dir", help="directory for emitted files")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("grid", help="build the velocity grid and report moments")
    sub.add_parser("assemble", help="assemble operators and report diagnostics")
    sub.add_parser("modes", help="fluid modes and characteristic speeds")

    d = sub.add_parser("dispersion", help="dispersion branches to CSV")
    d.add_argument("--pair", choices=("BB", "AB"), default="BB")
    d.add_argument("--kmax", type=float, default=0.5)
    d.add_argument("--nk", type=int, default=64)

    sub.add_parser("coeffs", help="transport coefficients to JSON")

    e = sub.add_parser("evolve", help="single-operator Green's function ladder")
    e.add_argument("--pair", choices=("AB", "BB"), default="AB")

    sub.add_parser("couple", help="coupled two-species evolution")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", choices=SUITES, required=True)
    return p


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.validate()
    if args.output_dir:
        cfg.output_dir = args.output_dir
    os.makedirs(cfg.output_dir, exist_ok=True)
    return cfg


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.output_dir, name)


def cmd_grid(cfg: RunConfig) -> int:
    g = build_grid(cfg.mixture, cfg.grid.mode, cfg.grid.resolution)
    w, M = g.weights, g.maxwellian(1.0)
    doc = {"mode": g.mode, "nodes": g.size, "id_hash": g.id_hash,
           "mass": float(np.sum(w * M)),
           "xi1_second_moment": float(np.sum(w * g.xi1**2 * M)),
           "max_speed": float(np.max(g.speed))}
    emit_json(doc, _out(cfg, "grid.json"))
    print(f"grid: {g.mode} {g.size} nodes, mass defect "
          f"{abs(doc['mass'] - 1.0):.2e}")
    return EXIT_OK


def cmd_assemble(cfg: RunConfig) -> int:
    pipe = build_pipeline(cfg)
    doc = {"environment": environment_fingerprint()}
    for op in (pipe.bb, pipe.ab):
        diag = operator_diagnostics(op, cfg.mixture, seed=cfg.seed)
        doc[op.pair] = {"meta": {k: v for k, v in op.meta.items()
                                 if isinstance(v, (int, float, str, bool))},
                        "diagnostics": diag.as_dict()}
    doc["BA"] = {"meta": {k: v for k, v in pipe.ba.meta.items()
                          if isinstance(v, (int, float, str, bool))},
                 "cancellation_residual":
                     cp.cancellation_residual(pipe.ba, pipe.basis)}
    emit_json(doc, _out(cfg, "operators.json"))
    print("assembled BB, AB, BA;",
          f"cancellation residual {doc['BA']['cancellation_residual']:.2e}")
    return EXIT_OK


def cmd_modes(cfg: RunConfig) -> int:
    pipe = build_pipeline(cfg, with_ba=False)
    grid, basis = pipe.grid, pipe.basis
    w = grid.weights
    T = np.array([[np.sum(w * basis.E[i].values * grid.xi1 * basis.E[j].values)
                   for j in range(3)] for i in range(3)])
    doc = {"lambdas": list(basis.lambdas),
           "P0_xi1_P0_eigenvalues": sorted(np.linalg.eigvalsh(T).tolist()),
           "E_D_norm": float(np.sqrt(np.sum(w * basis.E_D.values**2))),
           "E2_components": {"chi0": float(np.sum(w * basis.chi[0].values
                                                  * basis.E[1].values)),
                             "chi4": float(np.sum(w * basis.chi[4].values
                                                  * basis.E[1].values))}}
    emit_json(doc, _out(cfg, "modes.json"))
    print("modes: speeds", [f"{x:+.6f}" for x in doc["P0_xi1_P0_eigenvalues"]])
    return EXIT_OK


def cmd_dispersion(cfg: RunConfig, pair: str, kmax: float, nk: int) -> int:
    pipe = build_pipeline(cfg, with_ba=False)
    sop = pipe.sbb if pair == "BB" else pipe.sab
    ks = np.linspace(kmax / nk, kmax, nk)
    branches = sp.dispersion_branches(sop, ks)
    kappa0, delta = sp.find_kappa0(sop)
    cols = {"k": ks}
    for j, b in enumerate(branches):
        cols[f"re_sigma{j + 1}"] = b.eigenvalues.real[1:]
        cols[f"im_sigma{j + 1}"] = b.eigenvalues.imag[1:]
    cols["gap"] = np.array([sp.spectral_gap(sop, k, kappa0=kappa0, delta=delta)
                            for k in ks])
    path = _out(cfg, f"dispersion_{pair.lower()}.csv")
    emit_csv(path, cols)
    print(f"dispersion: {len(branches)} branches x {nk + 1} rows -> {path} "
          f"(kappa0 = {kappa0:.3f})")
    return EXIT_OK


def cmd_coeffs(cfg: RunConfig) -> int:
    pipe = build_pipeline(cfg, with_ba=False)
    tc = sp.transport_coefficients(pipe.sbb, pipe.sab)
    fits = {"A2_curvature": 0.5 * sp.curvature_fd(pipe.sbb, branch=1),
            "a2_curvature": -0.5 * sp.curvature_fd(pipe.sab)}
    doc = {"A1": tc.A[0], "A2": tc.A[1], "A3": tc.A[2], "a2": tc.a2,
           "epsilon_jk_abs": np.abs(tc.epsilon_jk).tolist(),
           "curvature_fits": fits,
           "lambda1": -sp.LAMBDA_SOUND, "lambda2": 0.0, "lambda3": sp.LAMBDA_SOUND}
    emit_json(doc, _out(cfg, "coeffs.json"))
    print(f"coeffs: A = ({tc.A[0]:.6f}, {tc.A[1]:.6f}, {tc.A[2]:.6f}), "
          f"a2 = {tc.a2:.6f}")
    return EXIT_OK


def _default_datum(pipe, even: bool = True) -> gr.InitialDatum:
    grid, basis = pipe.grid, pipe.basis
    w = grid.weights
    ED = basis.E_D.values
    micro = (grid.speed2 - 3.0) * ED if even else grid.xi1 * ED
    micro = micro - np.sum(w * ED * micro) * ED
    micro /= np.sqrt(np.sum(w * micro**2))
    q = ED + 0.35 * micro
    # normalize to the admissible data class: sup |q| (1+|xi|)^3 <= 1
    q = q / np.max(np.abs(q) * (1.0 + grid.speed) ** 3)
    return gr.InitialDatum(gr.smooth_bump(), GridFunction(grid, q))


def cmd_evolve(cfg: RunConfig, pair: str) -> int:
    pipe = build_pipeline(cfg, with_ba=False)
    sop = pipe.sab if pair == "AB" else pipe.sbb
    xg = gr.XGrid(cfg.spatial.half_length, cfg.spatial.dx)
    datum = _default_datum(pipe)
    fields = gr.evolve(sop, datum, xg, cfg.spatial.times,
                       aliasing_tol=cfg.tolerances["aliasing"])
    variants = ["full", "P1D-left"] if pair == "AB" else ["full", "P1-left"]
    profiles = {v: [gr.profile_norms(f, v, pipe.basis) for f in fields]
                for v in variants}
    for f, label in zip(fields, cfg.spatial.times):
        cols = {"x": f.xgrid.x}
        for v in variants:
            p = next(pp for pp in profiles[v] if pp.t == f.t)
            cols[f"norm_{v.replace('-', '_')}"] = p.norms
        emit_csv(_out(cfg, f"evolve_{pair.lower()}_t{label:g}.csv"), cols)
    speeds = [0.0] if pair == "AB" else [-sp.LAMBDA_SOUND, 0.0, sp.LAMBDA_SOUND]
    scale = sp.diffusion_coefficient(pipe.sab) if pair == "AB" \
        else abs(sp.ns_coefficients(pipe.sbb)[1])
    rep = gr.fit_waves(profiles["full"], speeds, diffusion_scale=scale,
                       mach_speed=sp.LAMBDA_SOUND)
    emit_json(rep, _out(cfg, f"evolve_{pair.lower()}_fit.json"))
    print(f"evolve {pair}: {len(fields)} times; decay exponents "
          f"{ {k: round(v['exponent'], 3) for k, v in rep.decay_exponents.items()} }")
    return EXIT_OK


def cmd_couple(cfg: RunConfig) -> int:
    pipe = build_pipeline(cfg)
    xg = gr.XGrid(cfg.spatial.half_length, cfg.spatial.dx)
    datum = _default_datum(pipe)
    states = cp.solve_coupled(pipe.sab, pipe.sbb, pipe.ba, datum, None, xg,
                              cfg.spatial.times,
                              aliasing_tol=cfg.tolerances["aliasing"],
                              config_hash=cfg.hash())
    ledger = []
    for s in states:
        q = cp.conserved_quantities(s, pipe.basis, cfg.mixture)
        q["t"] = s.t
        ledger.append(q)
        emit_csv(_out(cfg, f"couple_t{s.t:g}.csv"),
                 {"x": s.g.xgrid.x,
                  "g_norm": s.g.lxi_norms(),
                  "h_norm": s.h.lxi_norms()})
    a2 = sp.diffusion_coefficient(pipe.sab)
    A2 = sp.ns_coefficients(pipe.sbb)[1]
    reso = cp.resonance_coefficients(pipe.sab, pipe.ba, pipe.basis, seed=cfg.seed)
    doc = cp.verify_main_theorem(states, pipe.basis, cfg.mixture, a2, A2, reso)
    doc["conservation_ledger"] = ledger
    emit_json(doc, _out(cfg, "couple_report.json"))
    print(f"couple: {len(states)} states; in-cone sqrt(t) slope "
          f"{doc['in_cone_residual'].get('slope_vs_sqrt_t', float('nan')):.3f}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    rep = run_suite(suite, cfg)
    emit_json(rep, _out(cfg, f"verify_{suite}.json"))
    for c in rep.checks:
        mark = "ok " if c.passed else "FAIL"
        print(f"[{mark}] {c.id}: {c.value:.3e} "
              f"({'<=' if c.comparison == 'le' else '>='} {c.tolerance:.3e})")
    print(f"suite {suite}: {'pass' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "grid":
            return cmd_grid(cfg)
        if args.command == "assemble":
            return cmd_assemble(cfg)
        if args.command == "modes":
            return cmd_modes(cfg)
        if args.command == "dispersion":
            return cmd_dispersion(cfg, args.pair, args.kmax, args.nk)
        if args.command == "coeffs":
            return cmd_coeffs(cfg)
        if args.command == "evolve":
            return cmd_evolve(cfg, args.pair)
        if args.command == "couple":
            return cmd_couple(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
    except gr.AliasingError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
