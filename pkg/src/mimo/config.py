"""Engine configuration: key-sorted JSON config files with flag overrides.

Precedence is flags > file > defaults, so a config file is a reproducible
experiment manifest and any flag is a one-off override.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .core import CoreLimits
from .costs import PricingTable
from .errors import ConfigError
from .scripting import Strictness

_BACKENDS = ("live", "scripted")
_CLOCKS = ("wall", "counter")


@dataclass
class EngineConfig:
    backend: str = "live"
    script_path: str | None = None
    script_strictness: str = Strictness.KEYED_LOOKUP.value
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4o"
    temperature: float = 0.0
    max_revisions: int = 3
    max_steps: int = 12
    k: int = 5
    n: int = 3
    pricing: PricingTable = field(default_factory=PricingTable)
    layout_planner_enabled: bool = True
    seed: int = 0
    jobs: int | None = None
    clock: str = "wall"
    out_dir: str = "runs"
    banner_width: int = 512
    banner_height: int = 512

    def __post_init__(self):
        if self.backend not in _BACKENDS:
            raise ConfigError(f"backend must be one of {_BACKENDS}, got {self.backend!r}")
        if self.backend == "scripted" and not self.script_path:
            raise ConfigError("scripted backend requires a script path")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.clock not in _CLOCKS:
            raise ConfigError(f"clock must be one of {_CLOCKS}")
        if self.script_strictness not in {s.value for s in Strictness}:
            raise ConfigError(f"unknown script strictness {self.script_strictness!r}")
        if self.n < 1 or self.k < 1 or self.n > self.k:
            raise ConfigError("need 1 <= n <= k")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        self.limits  # validates max_steps >= max_revisions + 2

    @property
    def limits(self) -> CoreLimits:
        try:
            return CoreLimits(max_revisions=self.max_revisions, max_steps=self.max_steps)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.to_dict() if f.name == "pricing" else value
        return out


def _coerce(data: dict) -> dict:
    data = dict(data)
    if "pricing" in data and isinstance(data["pricing"], dict):
        data["pricing"] = PricingTable.from_dict(data["pricing"])
    return data


def load_config_file(path: str | Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return raw


def resolve_config(file_path: str | None, overrides: dict) -> EngineConfig:
    """Merge defaults, then file values, then explicit overrides."""
    merged: dict = {}
    if file_path:
        merged.update(load_config_file(file_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(EngineConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return EngineConfig(**_coerce(merged))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def parse_backend_flag(value: str) -> dict:
    """``live`` or ``scripted:<path>`` into config fields."""
    if value == "live":
        return {"backend": "live"}
    if value.startswith("scripted:"):
        path = value.split(":", 1)[1]
        if not path:
            raise ConfigError("scripted backend requires a path: scripted:<file>")
        return {"backend": "scripted", "script_path": path}
    raise ConfigError(f"backend must be 'live' or 'scripted:<path>', got {value!r}")
