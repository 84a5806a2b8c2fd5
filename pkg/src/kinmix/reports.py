"""Machine-readable verification reports and data emitters."""
from __future__ import annotations

import json
import platform
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .backend import BACKEND


@dataclass
class Check:
    id: str
    description: str
    value: float
    tolerance: float
    passed: bool
    comparison: str = "le"        # value <= tolerance ("le") or >= ("ge")

    def as_dict(self) -> dict:
        return {"id": self.id, "description": self.description,
                "value": self.value, "tolerance": self.tolerance,
                "comparison": self.comparison, "passed": bool(self.passed)}


@dataclass
class VerificationReport:
    suite: str
    config_hash: str
    checks: list = field(default_factory=list)

    def add(self, id: str, description: str, value: float, tolerance: float,
            comparison: str = "le") -> Check:
        value = float(value)
        if comparison == "le":
            ok = value <= tolerance
        elif comparison == "ge":
            ok = value >= tolerance
        else:
            raise ValueError(f"unknown comparison {comparison!r}")
        chk = Check(id, description, value, float(tolerance), bool(ok), comparison)
        self.checks.append(chk)
        return chk

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"suite": self.suite,
                "passed": self.passed,
                "config_hash": self.config_hash,
                "environment": environment_fingerprint(),
                "checks": [c.as_dict() for c in self.checks]}


def environment_fingerprint() -> dict:
    return {"kinmix": __version__, "backend": BACKEND,
            "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__,
            "machine": platform.machine()}


def emit_json(doc, path: str) -> None:
    """Deterministic JSON: sorted keys, full double precision floats."""
    if hasattr(doc, "as_dict"):
        doc = doc.as_dict()
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1, default=_jsonify)
        fh.write("\n")


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def emit_csv(path: str, columns: dict) -> None:
    """CSV with full-precision doubles (repr round-trips exactly)."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = len(arrays[0])
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(n):
            fh.write(",".join(repr(float(a[i])) for a in arrays) + "\n")
