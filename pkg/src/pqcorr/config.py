"""Line-based ``key = value`` run configuration."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

from .aggregate import SENSES, ThresholdRule
from .rankcorr import DEFAULT_CLAMP_EPS, DEFAULT_MIN_PAIRS, CorrelationConfig

CONFIG_ENV = "PQCORR_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    tau: float = 0.7
    sense: str = "positive"
    min_pairs: int = DEFAULT_MIN_PAIRS
    clamp_eps: float = DEFAULT_CLAMP_EPS
    day_offset_seconds: int = 0
    phase_pairing: str = "all"
    denominator: str = "total"
    mds_dims: int = 2
    n_clusters: int = 3
    threads: int = 1
    output: str = "out"

    def __post_init__(self):
        checks = [
            (0 < self.tau <= 1, "tau must lie in (0, 1]"),
            (self.sense in SENSES, f"sense must be one of {', '.join(SENSES)}"),
            (self.min_pairs >= 3, "min_pairs must be >= 3"),
            (0 < self.clamp_eps <= 1e-3, "clamp_eps must lie in (0, 1e-3]"),
            (0 <= self.day_offset_seconds < 86400, "day_offset_seconds must lie in [0, 86400)"),
            (self.phase_pairing in ("all", "matched"), "phase_pairing must be all or matched"),
            (self.denominator in ("total", "valid"), "denominator must be total or valid"),
            (self.mds_dims >= 1, "mds_dims must be >= 1"),
            (self.n_clusters >= 1, "n_clusters must be >= 1"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @property
    def correlation(self) -> CorrelationConfig:
        return CorrelationConfig(self.min_pairs, self.clamp_eps, self.day_offset_seconds, self.phase_pairing)

    @property
    def rule(self) -> ThresholdRule:
        return ThresholdRule(self.tau, self.sense)

    def replace(self, **changes) -> "Config":
        values = asdict(self)
        values.update({k: v for k, v in changes.items() if v is not None})
        return Config(**values)

    def to_dict(self) -> dict:
        return asdict(self)


_TYPES = {f.name: f.type for f in fields(Config)}
_CASTS = {"float": float, "int": int, "str": str}


def parse_config(text: str, source: str = "<config>") -> Config:
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = _CASTS[_TYPES[key]](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None
        lines[key] = lineno
    try:
        return Config(**values)
    except ConfigError as exc:
        key = str(exc).split(" ", 1)[0]
        where = f"{source}:{lines[key]}" if key in lines else source
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: Optional[os.PathLike] = None) -> Config:
    """Read a config file; the environment variable only supplies a default path."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return Config()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text(), str(p))
