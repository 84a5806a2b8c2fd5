"""Binary operator cache (format "BKIN1").

Layout: magic b"BKIN1" | version uint32 | pair tag 2 bytes | grid id_hash
(64 hex bytes) | config hash (64 hex bytes) | dims uint64, followed by the
collision frequency vector and the kernel matrix as row-major float64.
Loads are bit-exact and rejected on any header or hash mismatch.
"""
from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .grid import VelocityGrid
from .operators import CollisionOperator

MAGIC = b"BKIN1"
VERSION = 1
_HEADER = struct.Struct("<5sI2s64s64sQ")


class CacheError(IOError):
    """Base class for operator-cache failures."""


class CorruptCacheError(CacheError):
    pass


class CacheMismatchError(CacheError):
    pass


def cache_store(op: CollisionOperator, path: str) -> None:
    """Write the operator, atomically (temp file + rename)."""
    config_hash = op.meta.get("config_hash", "0" * 64)
    header = _HEADER.pack(MAGIC, VERSION, op.pair.encode().ljust(2),
                          op.grid.id_hash.encode(), config_hash.encode(),
                          op.size)
    payload = header + np.ascontiguousarray(op.nu, dtype=np.float64).tobytes() \
        + np.ascontiguousarray(op.kernel, dtype=np.float64).tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cache_load(path: str, grid: VelocityGrid, config_hash: str,
               pair: str | None = None) -> CollisionOperator:
    """Load an operator; reject corrupt files and hash mismatches."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CorruptCacheError(f"{path}: truncated header")
    magic, version, tag, ghash, chash, dims = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptCacheError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CacheMismatchError(f"{path}: format version {version} != {VERSION}")
    tag = tag.strip().decode()
    if pair is not None and tag != pair:
        raise CacheMismatchError(f"{path}: pair {tag!r} != {pair!r}")
    if ghash.decode() != grid.id_hash:
        raise CacheMismatchError(f"{path}: grid hash mismatch")
    if chash.decode() != config_hash:
        raise CacheMismatchError(f"{path}: config hash mismatch")
    need = _HEADER.size + 8 * dims + 8 * dims * dims
    if len(raw) != need:
        raise CorruptCacheError(f"{path}: expected {need} bytes, found {len(raw)}")
    if dims != grid.size:
        raise CacheMismatchError(f"{path}: dims {dims} != grid size {grid.size}")
    off = _HEADER.size
    nu = np.frombuffer(raw, dtype=np.float64, count=dims, offset=off).copy()
    kern = np.frombuffer(raw, dtype=np.float64, count=dims * dims,
                         offset=off + 8 * dims).reshape(dims, dims).copy()
    return CollisionOperator(tag, grid, nu, kern,
                             {"config_hash": config_hash, "cached": True})
