"""Standard assembly pipeline shared by the CLI and the verification suites."""
from __future__ import annotations

import os
from dataclasses import dataclass

from .cache import CacheError, cache_load, cache_store
from .config import RunConfig
from .grid import VelocityGrid, build_grid
from .operators import (CollisionOperator, assemble_lba, assemble_operator,
                        constrain_lba, lba_row_images)
from .spectral import FluidBasis, SpectralOperator, fluid_modes, prepare


@dataclass
class Pipeline:
    cfg: RunConfig
    grid: VelocityGrid
    basis: FluidBasis
    bb: CollisionOperator
    ab: CollisionOperator
    ba: CollisionOperator          # constrained production coupling operator
    ba_raw: CollisionOperator | None
    sbb: SpectralOperator
    sab: SpectralOperator


def cache_dir(cfg: RunConfig) -> str | None:
    return os.environ.get("KINETIC_CACHE_DIR", cfg.cache_dir)


def _cache_path(cdir: str, pair: str, cfg: RunConfig, grid: VelocityGrid) -> str:
    return os.path.join(cdir, f"{pair.lower()}-{cfg.hash()[:12]}-{grid.id_hash[:12]}.bkin")


def _load_or_assemble(pair: str, grid, cfg: RunConfig, builder):
    cdir = cache_dir(cfg)
    chash = cfg.hash()
    if cdir:
        path = _cache_path(cdir, pair, cfg, grid)
        if os.path.exists(path):
            try:
                return cache_load(path, grid, chash, pair)
            except CacheError:
                pass
    op = builder()
    op.meta["config_hash"] = chash
    if cdir:
        cache_store(op, _cache_path(cdir, pair, cfg, grid))
    return op


def build_pipeline(cfg: RunConfig, with_ba: bool = True,
                   keep_raw_ba: bool = False) -> Pipeline:
    """Grid, operators (cached when a cache dir is set), basis, spectral prep."""
    mix = cfg.mixture
    grid = build_grid(mix, cfg.grid.mode, cfg.grid.resolution)
    bb = _load_or_assemble("BB", grid, cfg,
                           lambda: assemble_operator("BB", grid, mix, nphi=cfg.phi_order))
    ab = _load_or_assemble("AB", grid, cfg,
                           lambda: assemble_operator("AB", grid, mix, nphi=cfg.phi_order))
    basis = fluid_modes(grid, mix)
    sbb = prepare(bb, basis)
    sab = prepare(ab, basis)
    ba = ba_raw = None
    if with_ba:
        def _build_ba():
            raw = assemble_lba(grid, mix, angular_order=cfg.angular_order,
                               nphi=max(cfg.angular_order, 12))
            return constrain_lba(raw, mix, row_targets=lba_row_images(grid, mix),
                                 ab_matrix=sab.matrix)
        if keep_raw_ba:
            ba_raw = assemble_lba(grid, mix, angular_order=cfg.angular_order,
                                  nphi=max(cfg.angular_order, 12))
            ba = constrain_lba(ba_raw, mix, row_targets=lba_row_images(grid, mix),
                               ab_matrix=sab.matrix)
            ba.meta["config_hash"] = cfg.hash()
        else:
            ba = _load_or_assemble("BA", grid, cfg, _build_ba)
    return Pipeline(cfg, grid, basis, bb, ab, ba, ba_raw, sbb, sab)
