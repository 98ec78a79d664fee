"""Check reports, JSON serialization and tolerance overrides."""

from __future__ import annotations

import json
import math
import os
import platform
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["CheckReport", "RunReport", "tolerance", "to_jsonable", "dumps", "TOLERANCE_DEFAULTS"]

# name -> default; override with DASEP_TOL_<NAME> (upper case)
TOLERANCE_DEFAULTS = {
    "row_sum": 1e-12,
    "interlacing": 1e-9,
    "forms": 1e-12,
    "detailed_balance": 1e-10,
    "orthogonality": 1e-8,
    "relations": 1e-12,
    "theorem2": 1e-10,
    "symmetry": 1e-9,
    "mc_sigma": 3.0,
}


def tolerance(name: str) -> float:
    """Default tolerance for ``name``, overridable through the environment."""
    default = TOLERANCE_DEFAULTS[name]
    raw = os.environ.get(f"DASEP_TOL_{name.upper()}")
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"DASEP_TOL_{name.upper()}={raw!r} is not a number") from None


@dataclass
class CheckReport:
    """One verification outcome: residual (or statistic) against a threshold."""

    check: str
    params: dict
    residual: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "residual": self.residual,
            "threshold": self.threshold,
            "pass": bool(self.passed),
            "details": self.details,
        }

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.check}: residual={self.residual:.3e} threshold={self.threshold:.1e}"


@dataclass
class RunReport:
    command: list[str]
    parameters: dict
    checks: list[CheckReport] = field(default_factory=list)
    timing: float = 0.0
    seed: int | None = None
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "checks": [c.as_dict() for c in self.checks],
            "pass": self.passed,
            "timing_seconds": self.timing,
            "seed": self.seed,
            "versions": versions(),
            "artifacts": self.artifacts,
        }


def versions() -> dict:
    import scipy

    from . import __version__

    return {"dasep": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, (CheckReport, RunReport)):
        return to_jsonable(obj.as_dict())
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if isinstance(obj, dict):
        # underscore keys hold in-memory objects (e.g. raw samples), not report data
        return {str(k): to_jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        # JSON has no inf/nan
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj: Any, indent: int | None = 2) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(to_jsonable(obj), indent=indent)
