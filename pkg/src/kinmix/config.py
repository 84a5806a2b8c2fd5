"""Physical parameters and run configuration.

Normalization: the background gas B sits in a Maxwellian with density 1 and
temperature such that RT = 1; the mean velocity is zero.  Masses are measured
relative to m_B, lengths in units of the molecular radius sums sigma_XY.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

CONFIG_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MixtureConfig:
    """Mixture parameters for the two hard-sphere gases A (dilute) and B (background)."""

    m_A: float = 2.0
    m_B: float = 1.0
    sigma_AA: float = 1.0
    sigma_AB: float = 1.0
    sigma_BB: float = 1.0
    rho_B: float = 1.0
    RT: float = 1.0

    def __post_init__(self):
        for name in ("m_A", "m_B", "sigma_AA", "sigma_AB", "sigma_BB"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.rho_B != 1.0 or self.RT != 1.0:
            raise ValueError("normalization requires rho_B = 1 and RT = 1")

    @property
    def mass_ratio(self) -> float:
        """m_A / m_B, the only mass combination entering the linear operators."""
        return self.m_A / self.m_B

    def hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class GridSpec:
    mode: str = "axisym-m0"          # "axisym-m0" | "full3d"
    resolution: tuple[int, ...] = (30, 15)

    def validate(self):
        if self.mode not in ("axisym-m0", "full3d"):
            raise ValueError(f"unknown grid mode {self.mode!r}")
        need = 2 if self.mode == "axisym-m0" else 3
        res = tuple(int(r) for r in self.resolution)
        if len(res) == 1:
            res = res * need
        if len(res) != need:
            raise ValueError(f"mode {self.mode} needs {need} resolution entries")
        if min(res) < 5:
            raise ValueError("resolution must be at least 5 nodes per coordinate")
        self.resolution = res


@dataclass
class SpatialSpec:
    half_length: float = 80.0        # periodic box is [-X, X)
    dx: float = 0.4
    times: tuple[float, ...] = (10.0, 20.0, 40.0, 80.0)

    def validate(self):
        if self.half_length <= 0 or self.dx <= 0:
            raise ValueError("half_length and dx must be positive")
        ts = tuple(float(t) for t in self.times)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("time ladder must be strictly increasing")
        if any(t < 0 for t in ts):
            raise ValueError("times must be non-negative")
        self.times = ts


@dataclass
class RunConfig:
    """Top-level configuration loaded from JSON ("schema": 1)."""

    mixture: MixtureConfig = field(default_factory=MixtureConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    oracle_grid: GridSpec = field(default_factory=lambda: GridSpec("full3d", (9, 9, 9)))
    spatial: SpatialSpec = field(default_factory=SpatialSpec)
    angular_order: int = 16          # BA assembly quadrature order
    phi_order: int = 32              # azimuthal average order for m0 kernel entries
    tolerances: dict = field(default_factory=lambda: {
        "nullspace": 1e-5,
        "selfadjoint": 1e-11,
        "cancellation": 1e-6,
        "conservation": 1e-6,
        "aliasing": 1e-8,
    })
    cache_dir: str | None = None
    output_dir: str = "."
    seed: int = 20260809

    def validate(self):
        self.grid.validate()
        self.oracle_grid.validate()
        self.spatial.validate()
        if self.angular_order < 2 or self.phi_order < 4:
            raise ValueError("quadrature orders too small")
        for key, val in self.tolerances.items():
            if val <= 0:
                raise ValueError(f"tolerance {key!r} must be positive")

    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self).encode()).hexdigest()


def canonical_json(cfg: RunConfig) -> str:
    doc = {
        "schema": CONFIG_SCHEMA_VERSION,
        "mixture": asdict(cfg.mixture),
        "grid": {"mode": cfg.grid.mode, "resolution": list(cfg.grid.resolution)},
        "oracle_grid": {"mode": cfg.oracle_grid.mode,
                        "resolution": list(cfg.oracle_grid.resolution)},
        "spatial": {"half_length": cfg.spatial.half_length, "dx": cfg.spatial.dx,
                    "times": list(cfg.spatial.times)},
        "angular_order": cfg.angular_order,
        "phi_order": cfg.phi_order,
        "tolerances": cfg.tolerances,
        "seed": cfg.seed,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


class ConfigError(ValueError):
    """Raised for malformed or schema-incompatible run configurations."""


def load_config(path_or_dict) -> RunConfig:
    """Load and validate a RunConfig from a JSON file path or a dict."""
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    schema = doc.get("schema", CONFIG_SCHEMA_VERSION)
    if schema != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema {schema}")
    try:
        cfg = RunConfig()
        if "mixture" in doc:
            cfg.mixture = MixtureConfig(**doc["mixture"])
        if "grid" in doc:
            g = doc["grid"]
            cfg.grid = GridSpec(g.get("mode", "axisym-m0"),
                                tuple(g.get("resolution", (30, 15))))
        if "oracle_grid" in doc:
            g = doc["oracle_grid"]
            cfg.oracle_grid = GridSpec(g.get("mode", "full3d"),
                                       tuple(g.get("resolution", (9, 9, 9))))
        if "spatial" in doc:
            s = doc["spatial"]
            cfg.spatial = SpatialSpec(s.get("half_length", 80.0), s.get("dx", 0.4),
                                      tuple(s.get("times", (10.0, 20.0, 40.0, 80.0))))
        for key in ("angular_order", "phi_order", "cache_dir", "output_dir", "seed"):
            if key in doc:
                setattr(cfg, key, doc[key])
        if "tolerances" in doc:
            cfg.tolerances.update(doc["tolerances"])
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg
