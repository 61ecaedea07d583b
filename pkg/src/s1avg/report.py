"""Run configuration and machine-readable reports."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import __version__
from .errors import ConfigError

__all__ = ["TAGS", "RunConfig", "Record", "Report", "parse_config_file", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

# Provenance tags: a fixed enumeration of the identities and formulas a
# record can check, grouped by module.
TAGS = {
    "avg.average": "S1-average of a tensor field",
    "avg.S": "integral operator S",
    "avg.LS": "L_U S = id - A",
    "avg.AS": "A S = S A = 0",
    "avg.AL": "A L_U = L_U A = 0",
    "avg.AA": "A is a projection",
    "avg.S-L-S2": "S = L_U S^2",
    "flow.period": "period and frequency data",
    "hom.function": "homological equation for functions",
    "hom.kvector": "homological equation for k-vector fields",
    "hom.vector": "homological equation for vector fields",
    "hom.kform": "homological equation for k-forms",
    "hom.gauge-term": "necessity of the S^2 term",
    "hom.necessary": "necessary conditions on the remainder",
    "hom.kernel": "kernel of L_X",
    "hom.closed": "decomposition of closed forms",
    "nf.generator": "normalizing generator",
    "nf.order": "first-order normal form",
    "nf.condition": "normalization condition L_<W> omega = 0",
    "nf.bracket": "[X, Wbar] = 0",
    "nf.vertical": "vertical-part elimination",
    "sf.split": "Hamiltonian splitting on a product",
    "sf.constants": "quartic model constants",
    "sf.monodromy": "monodromy periodicity",
    "sf.resonance": "resonance relation",
    "sf.averaged-perturbation": "L_<W> omega = 0 for slow-fast systems",
    "sf.period-energy": "d omega ^ d f = 0",
    "sf.solvability": "solvability of L_V theta = d1 F",
    "sf.hamiltonization": "modified symplectic form and Hamiltonian",
    "sf.averaged-symplectic": "representation of the averaged symplectic form",
    "sf.adiabatic": "adiabatic condition <d1 J> = 0",
    "sf.momentum": "momentum map of the averaged form",
    "harness": "harness bookkeeping",
}

CONFIG_KEYS = {
    "scenario": str, "field": str, "point": str, "delta": str, "r": str, "n": int, "k": int,
    "epsilon": str, "nodes": int, "tol": float, "seed": int, "probes": int, "box": str,
    "output": str, "format": str, "kind": str, "gauge": str, "k_max": int, "identity_check": bool,
    "criteria": str, "tol_scale": float, "control_offset": float, "r_values": str,
}


def _coerce(key: str, value):
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    typ = CONFIG_KEYS[key]
    if value is None or isinstance(value, typ):
        return value
    try:
        if typ is bool:
            return str(value).strip().lower() in ("1", "true", "yes", "on")
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value {value!r} for {key}") from exc


def parse_config_file(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = _coerce(key, value)
    return out


@dataclass
class RunConfig:
    """Scenario name plus flat parameters; unknown keys are rejected."""

    command: str
    params: dict = field(default_factory=dict)

    @classmethod
    def build(cls, command: str, file_values: Optional[dict] = None,
              overrides: Optional[dict] = None) -> "RunConfig":
        params = {}
        for src in (file_values or {}, overrides or {}):
            for key, value in src.items():
                if value is not None:
                    params[key] = _coerce(key, value)
        fmt = params.get("format", "json")
        if fmt not in ("json", "csv"):
            raise ConfigError(f"format must be json or csv, got {fmt!r}")
        return cls(command, params)

    def get(self, key: str, default=None):
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        return self.params.get(key, default)

    @property
    def seed(self) -> int:
        return int(self.params.get("seed", 0))

    def points(self, dim: int) -> np.ndarray:
        """``--point`` values: coordinates split by commas, points by semicolons."""
        raw = self.params.get("point")
        if raw is None:
            raise ConfigError("this command needs --point")
        try:
            pts = [[float(v) for v in chunk.split(",")] for chunk in raw.split(";") if chunk.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad point specification {raw!r}") from exc
        if any(len(p) != dim for p in pts):
            raise ConfigError(f"points must have {dim} coordinates")
        return np.array(pts)

    def floats(self, key: str, default=None):
        raw = self.params.get(key)
        if raw is None:
            return default
        try:
            return [float(v) for v in str(raw).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad list for {key}: {raw!r}") from exc


def _plain(value: Any):
    """JSON-friendly copy of numpy values; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    return value


@dataclass
class Record:
    name: str
    tag: str
    values: dict
    passed: Optional[bool] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown provenance tag {self.tag!r}")

    def as_dict(self) -> dict:
        return {"name": self.name, "tag": self.tag, "passed": self.passed,
                "values": _plain(self.values)}


@dataclass
class Report:
    command: str
    config: dict
    records: list = field(default_factory=list)
    started: float = field(default_factory=time.time)
    finished: Optional[float] = None
    timings: dict = field(default_factory=dict)

    def add(self, name: str, tag: str, values: dict, passed: Optional[bool] = None) -> Record:
        rec = Record(name, tag, values, passed)
        self.records.append(rec)
        return rec

    @property
    def all_passed(self) -> bool:
        return all(r.passed is not False for r in self.records)

    def exit_code(self) -> int:
        return 0 if self.all_passed else 1

    def results(self) -> list:
        return [r.as_dict() for r in self.records]

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "metadata": {"version": __version__, "command": self.command,
                         "config": _plain(self.config),
                         "started": self.started, "finished": self.finished or time.time(),
                         "timings": _plain(self.timings)},
            "results": self.results(),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per scalar value: ``name, tag, passed, key, value``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "tag", "passed", "key", "value"])
        for r in self.records:
            for key, value in _flatten(_plain(r.values)):
                w.writerow([r.name, r.tag, r.passed, key, value])
        return buf.getvalue()

    def render(self, fmt: str = "json") -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


def _flatten(value, prefix: str = ""):
    if isinstance(value, dict):
        for k, v in value.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(value, list):
        for i, v in enumerate(value):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, value
