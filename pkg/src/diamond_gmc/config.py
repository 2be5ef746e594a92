"""Run configuration and result records for the command-line driver."""

from __future__ import annotations

import dataclasses
import functools
import json
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .lattice import LatticeParams


@dataclass
class ExperimentConfig:
    """Everything that determines a run; (config, seed) fixes every output."""

    command: str = ""
    action: str = ""
    b: int = 2
    s: int = 3
    n: int = 3
    beta: float = 0.5
    alpha: float = 0.0
    t: float = 1.0
    K: int = 3
    m: int = 2
    level: int = 1
    seed: int = 0
    samples: int = 10_000
    workers: int = 1
    dist: str = "gaussian"
    betas: list = field(default_factory=lambda: [1.0, 2.0, 4.0, 8.0])
    n_list: list = field(default_factory=lambda: list(range(0, 31, 5)))
    cells: str = ""
    path: str = ""
    other: str = ""
    v1: str = "A"
    v2: str = "B"
    suite: str = "fast"
    out: Optional[str] = None
    format: str = "json"

    @property
    def params(self) -> LatticeParams:
        return LatticeParams(self.b, self.s)

    def validate(self) -> "ExperimentConfig":
        if self.format not in ("json", "csv"):
            raise ValueError(f"format must be json or csv, got {self.format!r}")
        if self.samples < 0 or self.workers < 1 or self.n < 0:
            raise ValueError("samples and n must be non-negative and workers positive")
        self.params  # validates b, s
        return self

    @classmethod
    def from_sources(cls, path: Optional[str] = None, overrides: Optional[dict] = None) -> "ExperimentConfig":
        """Config file values, then non-None overrides (flags win)."""
        values: dict = {}
        if path:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
            if not isinstance(loaded, dict):
                raise ValueError(f"config {path} must be a mapping")
            values.update(loaded)
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values).validate()


@functools.lru_cache(maxsize=1)
def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


@dataclass
class ResultRecord:
    """One experiment output.  ``values`` maps a key to a number (or a row dict)."""

    id: str
    inputs: dict
    values: dict
    se: dict = field(default_factory=dict)
    exact: bool = True
    wall_clock: float = 0.0
    git: str = field(default_factory=git_describe)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# fixed CSV layout: one row per (record, key)
CSV_COLUMNS = ("id", "key", "value", "se", "exact", "b", "s", "n", "beta", "seed", "wall_clock", "git")


def _jsonable(x: Any):
    if hasattr(x, "item"):
        return x.item()
    if hasattr(x, "numerator") and not isinstance(x, (int, float)):
        return str(x)
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    return x


def records_to_json(records: list[ResultRecord]) -> str:
    return json.dumps([_jsonable(r.to_dict()) for r in records], indent=2)


def records_to_rows(records: list[ResultRecord]) -> list[dict]:
    rows = []
    for r in records:
        for key, value in r.values.items():
            rows.append({
                "id": r.id, "key": key,
                "value": json.dumps(_jsonable(value)) if isinstance(value, (dict, list)) else _jsonable(value),
                "se": _jsonable(r.se.get(key, "")), "exact": r.exact,
                **{k: r.inputs.get(k, "") for k in ("b", "s", "n", "beta", "seed")},
                "wall_clock": f"{r.wall_clock:.6f}", "git": r.git,
            })
    return rows
