"""JSON run configurations for the sweep command.

A value specification is a scalar, an explicit list, or a range object
``{"start": a, "stop": b, "count": n, "spacing": "linear" | "geometric"}``.
A file holds either a single run or ``{"runs": [...], ...}`` where the
top-level keys other than ``runs`` are defaults shared by every run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Union

import numpy as np

from . import itf
from .errors import ConfigError
from .scaling import MODELS, SweepGrid
from .xxz import OMEGA_BRANCHES

SPACINGS = ("linear", "geometric")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RangeSpec:
    start: float
    stop: float
    count: int
    spacing: str = "linear"

    def __post_init__(self):
        if isinstance(self.count, bool) or not isinstance(self.count, int) or self.count < 1:
            raise ConfigError(f"range count must be a positive integer, got {self.count!r}")
        if self.spacing not in SPACINGS:
            raise ConfigError(f"range spacing must be one of {SPACINGS}, got {self.spacing!r}")
        if self.spacing == "geometric" and not (self.start > 0 and self.stop > 0):
            raise ConfigError("geometric ranges need positive start and stop")

    def values(self) -> list[float]:
        fn = np.geomspace if self.spacing == "geometric" else np.linspace
        return [float(v) for v in fn(self.start, self.stop, self.count)]

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start, "stop": self.stop, "count": self.count,
                "spacing": self.spacing}


Spec = Union[float, tuple, RangeSpec]


def parse_spec(raw: Any, name: str) -> Spec:
    if isinstance(raw, bool):
        raise ConfigError(f"{name}: booleans are not numeric values")
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, list):
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw):
            raise ConfigError(f"{name}: list entries must be numbers")
        return tuple(raw)
    if isinstance(raw, dict):
        unknown = set(raw) - {"start", "stop", "count", "spacing"}
        if unknown or not {"start", "stop", "count"} <= set(raw):
            raise ConfigError(f"{name}: range needs start, stop, count (and optional spacing); "
                              f"unexpected keys {sorted(unknown)}")
        return RangeSpec(raw["start"], raw["stop"], raw["count"], raw.get("spacing", "linear"))
    raise ConfigError(f"{name}: expected a number, list or range object, got {type(raw).__name__}")


def spec_values(spec: Spec | None) -> list[float]:
    if spec is None:
        return []
    if isinstance(spec, RangeSpec):
        return spec.values()
    if isinstance(spec, tuple):
        return [v for v in spec]
    return [spec]


def dump_spec(spec: Spec | None) -> Any:
    if isinstance(spec, RangeSpec):
        return spec.to_dict()
    if isinstance(spec, tuple):
        return list(spec)
    return spec


def _as_int(v: float, name: str) -> int:
    if int(v) != v:
        raise ConfigError(f"{name}: expected integers, got {v!r}")
    return int(round(v))


@dataclass(frozen=True)
class RunConfig:
    model: str
    coupling: Spec
    delta: Spec
    N: Spec | None = None
    ell: Spec | None = None
    k: int | None = None
    side: int = -1
    chi: bool = False
    chi_mode: str = "fd-calibrated"
    omega_branch: str = "signed-cos"
    J: float = 1.0
    out: str | None = None
    format: str = "csv"
    name: str | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if (self.N is None) == (self.ell is None):
            raise ConfigError("exactly one of 'N' and 'ell' must be given")
        if self.ell is not None and self.model != "itf":
            raise ConfigError("'ell' is only meaningful for the itf model")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.chi_mode not in itf.CHI_MODES:
            raise ConfigError(f"chi_mode must be one of {itf.CHI_MODES}, got {self.chi_mode!r}")
        if self.omega_branch not in OMEGA_BRANCHES:
            raise ConfigError(f"omega_branch must be one of {OMEGA_BRANCHES}, got {self.omega_branch!r}")
        if self.k is not None and (isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 0):
            raise ConfigError(f"k must be a non-negative integer, got {self.k!r}")
        if self.side not in (-1, 1):
            raise ConfigError(f"side must be -1 or 1, got {self.side!r}")
        if not isinstance(self.chi, bool):
            raise ConfigError(f"chi must be true or false, got {self.chi!r}")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("a run must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("model", "coupling", "delta"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
        values = dict(raw)
        for key in ("coupling", "delta", "N", "ell"):
            if values.get(key) is not None:
                values[key] = parse_spec(values[key], key)
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("coupling", "delta", "N", "ell"):
                value = dump_spec(value)
            if value is None and f.name in ("N", "ell", "k", "out", "name"):
                continue
            out[f.name] = value
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def sizes(self) -> list[int]:
        if self.N is not None:
            return [_as_int(v, "N") for v in spec_values(self.N)]
        return [itf.sites_from_ell(_as_int(v, "ell")) for v in spec_values(self.ell)]

    def grid(self) -> SweepGrid:
        return SweepGrid(model=self.model, couplings=spec_values(self.coupling),
                         deltas=spec_values(self.delta), sizes=self.sizes(), k=self.k,
                         side=self.side, chi=self.chi, chi_mode=self.chi_mode, J=self.J)


def parse_config(raw: Any) -> list[RunConfig]:
    """All runs described by a decoded config document."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "runs" not in raw:
        return [RunConfig.from_dict(raw)]
    runs = raw["runs"]
    if not isinstance(runs, list) or not runs:
        raise ConfigError("'runs' must be a non-empty list")
    defaults = {k: v for k, v in raw.items() if k != "runs"}
    return [RunConfig.from_dict({**defaults, **run}) for run in runs]


def load_config(path: str | Path) -> list[RunConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw)
