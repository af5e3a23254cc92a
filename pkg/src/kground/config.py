"""Plain ``key = value`` run configuration.

Example::

    # exterior of the ball of radius 2 in R^3
    N = 3
    m = 2
    p = 4
    R = 2
    weight = constant 1
    grid.M = 512
    grid.J = 64

Unknown keys, malformed values and violated invariants are errors that
carry the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, InvalidArgument
from .geometry import DomainSpec, ProblemSpec, WeightSpec

_INIT_KINDS = ("perturbed-radial", "random-cone")

# key -> (parser name, default); None default means required
_KEYS = {
    "N": ("int", None),
    "m": ("int", None),
    "p": ("float", None),
    "R": ("float", 1.0),
    "r_max": ("float", None),
    "weight": ("weight", "constant 1"),
    "domain": ("domain", "exterior"),
    "solver.tol": ("float", 1e-7),
    "solver.max_iter": ("int", 5000),
    "grid.M": ("int", 512),
    "grid.J": ("int", 64),
    "grid.n": ("int", 256),
    "init.epsilon": ("float", 0.3),
    "init.kind": ("str", "perturbed-radial"),
    "family.m": ("intlist", None),
    "sweep.R": ("range", None),
    "sweep.p": ("range", None),
    "seed": ("int", 0),
    "output": ("str", "out"),
}
_REQUIRED = ("N", "m", "p")


@dataclass
class RunConfig:
    spec: ProblemSpec
    tol: float = 1e-7
    max_iter: int = 5000
    M: int = 512
    J: int = 64
    n_ag: int = 256
    init_epsilon: float = 0.3
    init_kind: str = "perturbed-radial"
    family_m: Optional[list] = None
    sweep_R: list = field(default_factory=list)
    sweep_p: list = field(default_factory=list)
    seed: int = 0
    output: str = "out"
    text: str = ""

    def summary(self) -> dict:
        s = self.spec
        return {
            "N": s.N, "m": s.m, "p": s.p, "R": s.R, "r_max": s.r_max,
            "weight": s.weight.describe(), "domain": s.domain.describe(),
            "solver_tol": self.tol, "solver_max_iter": self.max_iter,
            "grid_M": self.M, "grid_J": self.J, "grid_n": self.n_ag,
            "init_epsilon": self.init_epsilon, "init_kind": self.init_kind,
            "seed": self.seed,
        }


def _parse_range(text: str) -> list:
    """"a:b:k" (k evenly spaced points) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range must read start:stop:count")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 1:
            raise ValueError("range count must be positive")
        return [float(v) for v in np.linspace(a, b, k)]
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_weight(text: str) -> WeightSpec:
    parts = text.split()
    if not parts:
        raise ValueError("empty weight")
    kind = parts[0]
    if kind == "tabulated-radial":
        # tabulated-radial r0 a0 r1 a1 ...
        vals = [float(v) for v in parts[1:]]
        if len(vals) % 2:
            raise ValueError("tabulated weight needs (r, a) pairs")
        table = tuple(zip(vals[0::2], vals[1::2]))
        return WeightSpec(kind, (), table)
    return WeightSpec(kind, tuple(float(v) for v in parts[1:]))


def _parse_domain(text: str) -> DomainSpec:
    parts = text.split()
    if parts == ["exterior"]:
        return DomainSpec("exterior")
    if parts and parts[0] == "double-revolution" and len(parts) == 3:
        return DomainSpec("double-revolution", float(parts[1]), float(parts[2]))
    raise ValueError("domain must be 'exterior' or 'double-revolution kappa c'")


def _convert(kind: str, raw: str):
    if kind == "int":
        v = float(raw)
        if v != int(v):
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(v)
    if kind == "float":
        return float(raw)
    if kind == "str":
        return raw
    if kind == "intlist":
        return [int(v) for v in raw.replace(",", " ").split()]
    if kind == "range":
        return _parse_range(raw)
    if kind == "weight":
        return _parse_weight(raw)
    if kind == "domain":
        return _parse_domain(raw)
    raise AssertionError(kind)


def _blame(msg: str, lines: dict) -> Optional[int]:
    """Line most likely responsible for a ProblemSpec error."""
    for key in ("r_max", "weight", "N", "m", "p", "R"):
        if msg.startswith(f"{key} ") or f"{key} must" in msg:
            return lines.get(key)
    if "weight" in msg:
        return lines.get("weight")
    if "A_g" in msg or "kappa" in msg:
        return lines.get("domain", lines.get("R"))
    return max(lines.values()) if lines else None


def parse_config(text: str, overrides: Optional[dict] = None) -> RunConfig:
    """Parse and validate a configuration; ``overrides`` replace parsed values."""
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _convert(_KEYS[key][0], val)
        except (ValueError, InvalidArgument) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    for key in _REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    get = lambda k: values.get(k, _KEYS[k][1])
    for key in ("weight", "domain"):
        if isinstance(get(key), str):
            values[key] = _convert(key, get(key))
    try:
        spec = ProblemSpec(N=get("N"), m=get("m"), p=get("p"), R=get("R"),
                           weight=get("weight"), domain=get("domain"), r_max=get("r_max"))
    except InvalidArgument as exc:
        raise ConfigError(str(exc), _blame(str(exc), lines)) from None

    def positive(key):
        v = get(key)
        if not v > 0:
            raise ConfigError(f"{key} must be positive", lines.get(key))
        return v

    if get("init.kind") not in _INIT_KINDS:
        raise ConfigError(f"init.kind must be one of {_INIT_KINDS}", lines.get("init.kind"))
    if not get("init.epsilon") >= 0:
        raise ConfigError("init.epsilon must be nonnegative", lines.get("init.epsilon"))
    if get("grid.M") < 2:
        raise ConfigError("grid.M must be at least 2", lines.get("grid.M"))
    return RunConfig(
        spec=spec,
        tol=positive("solver.tol"),
        max_iter=positive("solver.max_iter"),
        M=get("grid.M"),
        J=positive("grid.J"),
        n_ag=positive("grid.n"),
        init_epsilon=get("init.epsilon"),
        init_kind=get("init.kind"),
        family_m=get("family.m"),
        sweep_R=get("sweep.R") or [],
        sweep_p=get("sweep.p") or [],
        seed=get("seed"),
        output=get("output"),
        text=text,
    )
