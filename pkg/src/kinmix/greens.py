"""Fourier-space evolution of Green's functions and profile diagnostics.

The spatial variable lives on a periodic grid [-X, X) with FFT-matched
wavenumbers.  Initial data are separable smooth bumps phi(x) q(xi) compactly
supported in |x| <= 1.  Per wavenumber the semigroup of -ik xi1 + Op is
applied with a dense matrix exponential (scaling and squaring); a time ladder
reuses the base exponential by repeated application.  Profiles are per-x
L^2_xi norms, optionally with macro/micro projections applied on either side
of the evolution, and are post-processed into Gaussian hump fits, peak-decay
exponents, outside-Mach decay rates, and a tail classification.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import curve_fit
from scipy.stats import linregress

from .grid import GridFunction
from .spectral import SpectralOperator, FluidBasis, project

DEFAULT_TIMES = (10.0, 20.0, 40.0, 80.0, 160.0)


@dataclass(frozen=True)
class XGrid:
    """Uniform periodic spatial grid [-X, X) with its rfft wavenumbers."""

    half_length: float
    dx: float

    @property
    def n(self) -> int:
        n = int(round(2.0 * self.half_length / self.dx))
        return n + (n % 2)

    @property
    def x(self) -> np.ndarray:
        return -self.half_length + self.dx * np.arange(self.n)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, self.dx)


def smooth_bump(sigma: float = 0.42, power: int = 10):
    """Compactly supported C^{power-1} bump on |x| < 1 (Gaussian x cosine taper)."""
    def phi(x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x) < 1.0
        out = np.zeros_like(x)
        xs = x[inside]
        out[inside] = np.exp(-xs * xs / (2.0 * sigma * sigma)) \
            * np.cos(0.5 * np.pi * xs) ** power
        return out
    return phi


@dataclass
class InitialDatum:
    """Separable initial datum phi(x) q(xi), supported in |x| <= half_support."""

    phi: object                   # callable x -> amplitude
    q: GridFunction
    half_support: float = 1.0


@dataclass
class SpatialField:
    """Distribution data over (x grid) x (velocity grid) at one time."""

    xgrid: XGrid
    grid: object                  # velocity grid
    t: float
    values: np.ndarray            # physical: (n_x, N) real
    representation: str = "physical"

    def lxi_norms(self) -> np.ndarray:
        w = self.grid.weights
        return np.sqrt(np.abs(self.values) ** 2 @ w)


@dataclass
class ProfileCurve:
    x: np.ndarray
    norms: np.ndarray
    variant: str
    t: float


@dataclass
class FitReport:
    humps: list = field(default_factory=list)       # per (t, speed): center/height/width
    decay_exponents: dict = field(default_factory=dict)
    outside_mach: dict = field(default_factory=dict)
    tail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"humps": self.humps, "decay_exponents": self.decay_exponents,
                "outside_mach": self.outside_mach, "tail": self.tail}


class AliasingError(ValueError):
    """Initial datum is not band-limited on the requested spatial grid."""


def propagate_fourier(sop: SpectralOperator, k: float, t: float,
                      fhat: np.ndarray) -> np.ndarray:
    """Apply exp((-ik xi1 + Op) t) to one Fourier coefficient vector."""
    if not np.isfinite(t) or t < 0:
        raise ValueError("time must be finite and non-negative")
    sw = np.sqrt(sop.grid.weights)
    A = (sop.sym.astype(complex) - 1j * k * np.diag(sop.grid.xi1)) * t
    return sla.expm(A) @ (sw * fhat) / sw


def _datum_spectrum(datum: InitialDatum, xgrid: XGrid, aliasing_tol: float):
    phys = datum.phi(xgrid.x)
    spec = np.fft.rfft(phys)
    peak = np.max(np.abs(spec))
    if np.abs(spec[-1]) > aliasing_tol * peak:
        raise AliasingError(
            f"datum spectrum at k_max is {np.abs(spec[-1]) / peak:.2e} of peak "
            f"(> {aliasing_tol:.0e}); refine dx")
    spec[-1] = 0.0      # drop the unpaired Nyquist mode
    return spec


def evolve(sop: SpectralOperator, datum: InitialDatum, xgrid: XGrid, times,
           k_mask=None, aliasing_tol: float = 1e-8) -> list:
    """Evolve the datum; returns a SpatialField per requested time.

    The time ladder is walked with repeated applications of the exponential
    for the smallest time step (one expm per wavenumber).  ``k_mask`` selects
    a subset of wavenumber bins (long-wave / short-wave splitting); the parts
    sum exactly to the full evolution.
    """
    times = sorted(float(t) for t in times)
    if times[0] < 0:
        raise ValueError("times must be non-negative")
    spec = _datum_spectrum(datum, xgrid, aliasing_tol)
    kvals = xgrid.k
    if k_mask is not None:
        spec = np.where(np.asarray(k_mask, dtype=bool), spec, 0.0)
    qv = datum.q.values
    sw = np.sqrt(sop.grid.weights)
    qs = sw * qv
    # step counts: all times as integer multiples of a base step
    base = times[0] if times[0] > 0 else (times[1] if len(times) > 1 else 1.0)
    for t in times:
        if t > 0:
            base = min(base, t)
    steps = []
    for t in times:
        n = int(round(t / base))
        if abs(n * base - t) > 1e-9 * max(1.0, t):
            steps = None
            break
        steps.append(n)
    nk, N = len(kvals), sop.grid.size
    out_hat = np.zeros((len(times), nk, N), dtype=complex)
    D = sop.grid.xi1
    for ik, k in enumerate(kvals):
        amp = spec[ik]
        if amp == 0.0:
            continue
        A = sop.sym.astype(complex) - 1j * k * np.diag(D)
        if steps is not None:
            E = sla.expm(A * base)
            v = amp * qs
            done = 0
            for it, n in enumerate(steps):
                while done < n:
                    v = E @ v
                    done += 1
                out_hat[it, ik] = v
        else:
            for it, t in enumerate(times):
                out_hat[it, ik] = sla.expm(A * t) @ (amp * qs)
    fields = []
    for it, t in enumerate(times):
        phys = np.fft.irfft(out_hat[it] / sw[None, :], n=xgrid.n, axis=0)
        fields.append(SpatialField(xgrid, sop.grid, t, phys))
    return fields


def longwave_shortwave_split(xgrid: XGrid, kappa0: float):
    """Boolean masks tagging each wavenumber bin long (|k| <= kappa0) or short."""
    long_mask = xgrid.k <= kappa0
    return long_mask, ~long_mask


def particle_term(op, datum: InitialDatum, x, t: float) -> np.ndarray:
    """Damped free transport e^{-nu(xi) t} g_in(x - xi1 t, xi).

    ``op`` supplies the collision frequency of the species pair.  Returns
    values over (x points, velocity nodes).
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    grid = op.grid
    x = np.atleast_1d(np.asarray(x, dtype=float))
    shift = x[:, None] - grid.xi1[None, :] * t
    damp = np.exp(-op.nu * t)
    return datum.phi(shift) * damp[None, :] * datum.q.values[None, :]


def profile_norms(fieldobj: SpatialField, variant: str,
                  basis: FluidBasis) -> ProfileCurve:
    """Per-x L^2_xi norm after applying the requested left projector.

    Variants: 'full', 'P1-left' (and 'P1D-left'), 'mode-k' for the Euler-mode
    projections E_k <E_k|.  Right projections act on the datum before
    evolution and are not re-derivable here.
    """
    vals = fieldobj.values
    w = fieldobj.grid.weights
    if variant == "full":
        out = vals
    elif variant in ("P1-left", "P1D-left"):
        which = "P1" if variant == "P1-left" else "P1D"
        cols = [basis.chi[i].values for i in sorted(basis.chi)] \
            if which == "P1" else [basis.E_D.values]
        out = vals.copy()
        for c in cols:
            out -= np.outer(vals @ (w * c), c)
    elif variant.startswith("mode-"):
        kidx = int(variant.split("-")[1])
        c = basis.E[kidx].values
        out = np.outer(vals @ (w * c), c)
    else:
        raise ValueError(f"unknown profile variant {variant!r}")
    norms = np.sqrt(np.abs(out) ** 2 @ w)
    return ProfileCurve(fieldobj.xgrid.x, norms, variant, fieldobj.t)


# ---------------------------------------------------------------------------
# wave fitting
# ---------------------------------------------------------------------------

def _gauss(x, a, c, s):
    return a * np.exp(-((x - c) ** 2) / (2.0 * s * s))


def fit_hump(curve: ProfileCurve, speed: float, diffusion_scale: float = 1.0,
             other_speeds=()):
    """Gaussian fit of the hump expected at x = speed * t.

    The window is capped below half the distance to neighbouring humps so
    overlapping shoulders at early times do not contaminate the fit.
    """
    t = curve.t
    center0 = speed * t
    width0 = max(1.0, np.sqrt(2.0 * diffusion_scale * (1.0 + t)))
    half = 3.0 * width0
    for s in other_speeds:
        if s != speed:
            half = min(half, 0.45 * abs(s - speed) * t)
    if half < 2.0 * curve.x[1] - 2.0 * curve.x[0]:
        return None
    sel = np.abs(curve.x - center0) < half
    xs, ys = curve.x[sel], curve.norms[sel]
    if len(xs) < 8 or np.max(ys) <= 0:
        return None
    a0 = float(np.max(ys))
    c0 = float(xs[np.argmax(ys)])
    try:
        popt, _ = curve_fit(_gauss, xs, ys, p0=(a0, c0, width0),
                            maxfev=20000)
    except RuntimeError:
        return None
    a, c, s = popt
    resid = float(np.sqrt(np.mean((ys - _gauss(xs, *popt)) ** 2)) / max(a, 1e-300))
    return {"t": t, "speed": speed, "center": float(c), "height": float(abs(a)),
            "width": float(abs(s)), "residual": resid}


def fit_waves(profiles: list, speeds, diffusion_scale: float = 1.0,
              mach_speed: float | None = None, floor: float = 1e-11) -> FitReport:
    """Hump fits, peak-decay exponents, outside-Mach decay, tail class.

    ``profiles`` is a list of ProfileCurve at increasing times (ladder must
    span a factor >= 4).  ``speeds`` are the expected hump speeds.
    """
    times = [p.t for p in profiles]
    if len(times) < 4 or max(times) < 4.0 * min(times):
        raise ValueError("need >= 4 profile times spanning a factor >= 4")
    report = FitReport()
    heights = {s: [] for s in speeds}
    for p in profiles:
        for s in speeds:
            h = fit_hump(p, s, diffusion_scale, other_speeds=speeds)
            if h is not None:
                report.humps.append(h)
                heights[s].append((p.t, h["height"]))
    for s, pts in heights.items():
        if len(pts) >= 3:
            ts = np.array([q[0] for q in pts])
            hs = np.array([q[1] for q in pts])
            res = linregress(np.log(1.0 + ts), np.log(hs))
            report.decay_exponents[f"speed={s:g}"] = {
                "exponent": float(res.slope), "r2": float(res.rvalue**2)}
    if mach_speed is not None:
        pts_x, pts_y = [], []
        scale = max(np.max(p.norms) for p in profiles)
        for p in profiles:
            sel = (np.abs(p.x) >= 2.0 * mach_speed * p.t) & (p.norms > floor * scale)
            pts_x.extend(np.abs(p.x[sel]) + p.t)
            pts_y.extend(np.log(p.norms[sel]))
        if len(pts_x) > 10:
            res = linregress(pts_x, pts_y)
            report.outside_mach = {"slope": float(res.slope),
                                   "r2": float(res.rvalue**2),
                                   "n_points": len(pts_x)}
    # tail classification beyond the fastest hump, at the latest usable time
    vmax = max(abs(s) for s in speeds)
    p = profiles[-1]
    lead = vmax * p.t + 4.0 * np.sqrt(2.0 * diffusion_scale * (1.0 + p.t))
    sel = (p.x > lead) & (p.norms > floor * np.max(p.norms))
    if sel.sum() > 12:
        xs, ys = p.x[sel], np.log(p.norms[sel])
        lin = linregress(xs, ys)
        lg = linregress(np.log(xs), ys)
        r2lin, r2log = lin.rvalue**2, lg.rvalue**2
        if max(r2lin, r2log) < 0.8:
            cls = "inconclusive"
        else:
            cls = "exponential" if r2lin >= r2log else "algebraic"
        report.tail = {"classification": cls,
                       "exp_rate": float(-lin.slope), "exp_r2": float(r2lin),
                       "alg_power": float(-lg.slope), "alg_r2": float(r2log),
                       "window": [float(xs[0]), float(xs[-1])], "t": p.t}
    else:
        report.tail = {"classification": "inconclusive", "reason": "tail below floor"}
    return report
