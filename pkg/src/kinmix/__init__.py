"""kinmix: linearized Boltzmann operators and Green's functions for a binary
hard-sphere mixture (a dilute gas A diffusing through a background gas B)."""

from .config import MixtureConfig, RunConfig, GridSpec, SpatialSpec, load_config
from .grid import (VelocityGrid, GridFunction, build_grid, inner_product, norm,
                   weighted_sup_norm, restrict_subspace)
from .backend import BACKEND

__version__ = "0.1.0"

__all__ = [
    "MixtureConfig", "RunConfig", "GridSpec", "SpatialSpec", "load_config",
    "VelocityGrid", "GridFunction", "build_grid", "inner_product", "norm",
    "weighted_sup_norm", "restrict_subspace", "BACKEND", "__version__",
]
