"""Velocity-space discretization and the discrete L^2_xi structure.

Two node layouts are supported:

* ``full3d`` -- tensor product of Gauss--Hermite rules in (xi1, xi2, xi3).
  Small instances serve as brute-force oracles.
* ``axisym-m0`` -- production layout: nodes (xi1, r) with r = |xi_perp|,
  Gauss--Hermite along xi1 and generalized Gauss--Laguerre in r^2 radially.
  Weights include the 2*pi*r angular factor, so sums over nodes approximate
  integrals over R^3 for azimuthally symmetric integrands.

Both rules are generated against the Gaussian weight exp(-alpha*|xi|^2) with
alpha = min(m_A/m_B, 1)/2 and then rescaled to plain-dxi weights; along each
coordinate, Gaussian-weighted polynomials up to degree 2n-1 (in xi1, resp. in
r^2) are integrated exactly.  Grid functions hold raw point values; weights
enter only through inner products.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_hermite, roots_laguerre

from .config import MixtureConfig, GridSpec

TWO_PI = 2.0 * np.pi


def _hermite_plain(n: int, alpha: float):
    """Nodes/weights integrating f against plain dx, Gauss-exact vs exp(-alpha x^2)."""
    y, w = roots_hermite(n)
    y = 0.5 * (y - y[::-1])                 # enforce exact +/- symmetry
    w = 0.5 * (w + w[::-1])
    x = y / np.sqrt(alpha)
    wp = w / np.sqrt(alpha) * np.exp(alpha * x * x)
    return x, wp


def _radial_plain(n: int, alpha: float):
    """Nodes/weights integrating f(r) over R^2 (includes 2*pi*r), vs exp(-alpha r^2)."""
    t, u = roots_laguerre(n)
    r = np.sqrt(t / alpha)
    w = (np.pi / alpha) * u * np.exp(t)
    return r, w


@dataclass(frozen=True)
class VelocityGrid:
    """Immutable velocity quadrature grid."""

    mode: str
    nodes: np.ndarray            # (N, 3) for full3d, (N, 2) = (xi1, r) for axisym-m0
    weights: np.ndarray          # plain-dxi quadrature weights, > 0
    alpha: float
    resolution: tuple[int, ...]
    axis_nodes: tuple[np.ndarray, ...] = field(repr=False, default=())
    id_hash: str = ""

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        if self.id_hash == "":
            h = hashlib.sha256()
            h.update(self.mode.encode())
            h.update(np.ascontiguousarray(self.nodes).tobytes())
            h.update(np.ascontiguousarray(self.weights).tobytes())
            object.__setattr__(self, "id_hash", h.hexdigest())

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def xi1(self) -> np.ndarray:
        return self.nodes[:, 0]

    @property
    def rperp(self) -> np.ndarray:
        """|xi_perp|: the radial coordinate on m0 grids, sqrt(xi2^2+xi3^2) on 3d."""
        if self.mode == "axisym-m0":
            return self.nodes[:, 1]
        return np.hypot(self.nodes[:, 1], self.nodes[:, 2])

    @property
    def speed2(self) -> np.ndarray:
        return self.xi1**2 + self.rperp**2

    @property
    def speed(self) -> np.ndarray:
        return np.sqrt(self.speed2)

    def reflection_index(self) -> np.ndarray:
        """Node permutation realizing xi1 -> -xi1 (exact by construction)."""
        n1 = self.resolution[0]
        rest = self.size // n1
        idx = np.arange(self.size).reshape(n1, rest)
        return idx[::-1].reshape(-1)

    def maxwellian(self, mass_ratio: float = 1.0) -> np.ndarray:
        """M(xi) = (2 pi)^{-3/2} exp(-mass_ratio |xi|^2 / 2); mass_ratio=1 gives M_B."""
        return (TWO_PI) ** -1.5 * np.exp(-0.5 * mass_ratio * self.speed2)

    def sqrt_maxwellian(self, mass_ratio: float = 1.0) -> np.ndarray:
        return (TWO_PI) ** -0.75 * np.exp(-0.25 * mass_ratio * self.speed2)


@dataclass
class GridFunction:
    """Raw point values of a velocity-space function on a grid."""

    grid: VelocityGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.size,):
            raise ValueError("value array length must equal the node count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def build_grid(config: MixtureConfig, mode: str, resolution) -> VelocityGrid:
    """Construct a velocity grid for the given mixture and layout."""
    spec = GridSpec(mode, tuple(np.atleast_1d(resolution)))
    spec.validate()
    alpha = min(config.mass_ratio, 1.0) / 2.0
    if spec.mode == "full3d":
        n1, n2, n3 = spec.resolution
        xs = [_hermite_plain(n, alpha) for n in (n1, n2, n3)]
        X = np.stack(np.meshgrid(xs[0][0], xs[1][0], xs[2][0], indexing="ij"),
                     axis=-1).reshape(-1, 3)
        W = (xs[0][1][:, None, None] * xs[1][1][None, :, None]
             * xs[2][1][None, None, :]).reshape(-1)
        axis_nodes = (xs[0][0], xs[1][0], xs[2][0])
    else:
        n1, nr = spec.resolution
        x, wx = _hermite_plain(n1, alpha)
        r, wr = _radial_plain(nr, alpha)
        X = np.stack(np.broadcast_arrays(x[:, None], r[None, :]),
                     axis=-1).reshape(-1, 2)
        W = (wx[:, None] * wr[None, :]).reshape(-1)
        axis_nodes = (x, r)
    return VelocityGrid(spec.mode, X, W, alpha, spec.resolution, axis_nodes)


def _check_same_grid(f: GridFunction, g: GridFunction):
    if f.grid.id_hash != g.grid.id_hash:
        raise ValueError("grid mismatch between grid functions")


def inner_product(f: GridFunction, g: GridFunction):
    """Discrete L^2_xi pairing sum_i w_i conj(f_i) g_i."""
    _check_same_grid(f, g)
    return np.sum(f.grid.weights * np.conjugate(f.values) * g.values)


def norm(f: GridFunction) -> float:
    return float(np.sqrt(np.sum(f.grid.weights * np.abs(f.values) ** 2).real))


def weighted_sup_norm(f: GridFunction) -> float:
    """max_i |f_i| (1+|xi_i|)^3, the decay-weighted sup norm of the initial-data class."""
    return float(np.max(np.abs(f.values) * (1.0 + f.grid.speed) ** 3))


def restrict_subspace(f: GridFunction) -> GridFunction:
    """Project out the xi2*sqrt(M_B) and xi3*sqrt(M_B) directions (planar-wave sector).

    Azimuthally symmetric (m0) functions are already in the subspace; on m0
    grids this is the identity.
    """
    if f.grid.mode == "axisym-m0":
        return f.copy()
    w = f.grid.weights
    out = f.values.astype(np.result_type(f.values, float)).copy()
    sq = f.grid.sqrt_maxwellian(1.0)
    for axis in (1, 2):
        chi = f.grid.nodes[:, axis] * sq
        nrm2 = np.sum(w * chi * chi)
        out -= (np.sum(w * chi * out) / nrm2) * chi
    return GridFunction(f.grid, out)
