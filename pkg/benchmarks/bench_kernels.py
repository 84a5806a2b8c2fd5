"""Benchmark: compiled kernel core vs the pure-numpy fallback.

Times the two hot assembly kernels (the azimuthally averaged single- and
cross-species gain matrix, and the coupling-operator gain matrix) on the
production m0 grid, and cross-checks that both backends agree to roundoff.

Run:  python benchmarks/bench_kernels.py [n_x n_r]
"""
import sys
import time

import numpy as np

from kinmix import MixtureConfig, build_grid
from kinmix import _kernels_py as kpy

try:
    from kinmix import _kernels_cy as kcy
except ImportError:
    kcy = None


def timeit(fn, *args, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    res = (int(sys.argv[1]), int(sys.argv[2])) if len(sys.argv) > 2 else (30, 15)
    cfg = MixtureConfig()
    grid = build_grid(cfg, "axisym-m0", res)
    x, r, sq = grid.xi1, grid.rperp, grid.speed2
    a = (x[:, None] - x[None, :]) ** 2 + r[:, None] ** 2 + r[None, :] ** 2
    b = 2.0 * r[:, None] * r[None, :]
    d2 = (sq[:, None] - sq[None, :]) ** 2
    print(f"grid {res} -> {grid.size} nodes; backends: numpy"
          + (", cython" if kcy else " (cython unavailable)"))

    cases = [("m0_gain_matrix (BB, nphi=32)",
              lambda k: k.m0_gain_matrix(a, b, d2, 1.0, 32)),
             ("ba_gain_matrix_m0 (nphi=12, nu=16)",
              lambda k: k.ba_gain_matrix_m0(x, r, cfg.mass_ratio,
                                            cfg.sigma_AB**2, 12, 16))]
    for name, call in cases:
        t_py, out_py = timeit(call, kpy)
        line = f"{name:38s} numpy {t_py * 1e3:8.1f} ms"
        if kcy is not None:
            t_cy, out_cy = timeit(call, kcy)
            err = np.max(np.abs(out_py - out_cy)) / max(np.max(np.abs(out_py)), 1e-300)
            line += f"   cython {t_cy * 1e3:8.1f} ms   x{t_py / t_cy:4.1f}  agree {err:.1e}"
        print(line)


if __name__ == "__main__":
    main()
