from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field


@dataclass
class SolveReport:
    energy: float = math.nan
    nehari_residual: float = math.nan
    projected_grad_norm: float = math.nan
    symmetry_metric: float = math.nan
    iterations: int = 0
    converged: bool = False
    tail_bounds: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    history: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def flat(self) -> dict:
        """Flat key/value view suitable for JSON (history omitted)."""
        out = {}
        for key, val in asdict(self).items():
            if key == "history":
                continue
            if key == "tail_bounds":
                for k, (lhs, rhs) in val.items():
                    out[f"tail_bound_k{k}_lhs"] = lhs
                    out[f"tail_bound_k{k}_rhs"] = rhs
            elif key == "extra":
                out.update(val)
            elif key == "flags":
                out["flags"] = ";".join(val)
            else:
                out[key] = val
        return out


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


def dump_json(obj: dict, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
