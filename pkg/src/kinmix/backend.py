"""Select the compiled kernel core at import time, with a numpy fallback.

The Cython extension is optional: source installs without a compiler fall
back to the pure-numpy twin transparently.  Set KINMIX_FORCE_NUMPY=1 to force
the fallback (used by the benchmark for comparison).
"""
from __future__ import annotations

import os

from . import _kernels_py

_FORCED = bool(os.environ.get("KINMIX_FORCE_NUMPY"))

if not _FORCED:
    try:
        from . import _kernels_cy  # type: ignore[attr-defined]
        HAVE_CYTHON = True
    except ImportError:
        _kernels_cy = None
        HAVE_CYTHON = False
else:
    _kernels_cy = None
    HAVE_CYTHON = False

BACKEND = "cython" if HAVE_CYTHON else "numpy"

# Hot entry points; anything the compiled core does not provide falls back.
_HOT = ("m0_gain_matrix", "ba_gain_matrix_m0", "ba_gain_matrix_3d")


def _pick(name: str):
    if HAVE_CYTHON and hasattr(_kernels_cy, name):
        return getattr(_kernels_cy, name)
    return getattr(_kernels_py, name)


m0_gain_matrix = _pick("m0_gain_matrix")
ba_gain_matrix_m0 = _pick("ba_gain_matrix_m0")
ba_gain_matrix_3d = _pick("ba_gain_matrix_3d")

# always-numpy helpers
nu_profile = _kernels_py.nu_profile
kernel_bb_points = _kernels_py.kernel_bb_points
kernel_ab_points = _kernels_py.kernel_ab_points
m0_loss_phi_average = _kernels_py.m0_loss_phi_average
ba_eqmass_gain_points = _kernels_py.ba_eqmass_gain_points
dir_avg_coef = _kernels_py.dir_avg_coef
