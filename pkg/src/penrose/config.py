"""Configuration files and protocol defaults.

All config files are INI.  Durations accept a plain number of seconds or a
suffixed value such as ``500ms``, ``600s``, ``10m``, ``2h`` or ``1d``.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, fields
from pathlib import Path

NS_PER_S = 1_000_000_000

# Protocol defaults (sampling interval, reset interval, aggregation threshold,
# snippet length, report interval).
DEFAULT_S = 10_000
DEFAULT_O_S = 600.0
DEFAULT_A = 10_000
DEFAULT_L = 10_000
DEFAULT_DELTA_S = 86_400.0
# Partial-histogram time-out.  One report period: short enough that stale
# partials are reported in the period they were collected, long enough that
# a fully loaded GPU always reaches A first.
DEFAULT_T_S = DEFAULT_DELTA_S

_UNITS = {"ns": 1e-9, "us": 1e-6, "ms": 1e-3, "s": 1.0, "m": 60.0, "min": 60.0,
          "h": 3600.0, "d": 86_400.0}
_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([a-z]*)\s*$")


class ConfigError(ValueError):
    pass


def parse_duration(text: str | float | int) -> float:
    """Seconds represented by ``text``."""
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        m = _DURATION.match(text.lower())
        if not m or m.group(2) not in _UNITS | {"": 1.0}:
            raise ConfigError(f"bad duration {text!r}")
        value = float(m.group(1)) * _UNITS.get(m.group(2), 1.0)
    if value < 0:
        raise ConfigError(f"negative duration {text!r}")
    return value


def seconds_to_ns(s: float) -> int:
    return int(round(s * NS_PER_S))


def _read(path_or_text: str | Path, is_text: bool = False) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if is_text:
        cp.read_string(str(path_or_text))
    else:
        path = Path(path_or_text)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        cp.read(path, encoding="utf-8")
    return cp


@dataclass
class AgentConfig:
    S: int = DEFAULT_S
    O: float = DEFAULT_O_S
    A: int = DEFAULT_A
    T: float = DEFAULT_T_S
    L: int = DEFAULT_L
    load_factor: float = 1.0
    time_scale_ns: int = 521_000
    registry: str = ""
    app_salt: str = ""
    rotation: str = "independent"
    root_seed_id: int = 1
    max_retries: int = 3

    def validate(self) -> "AgentConfig":
        if self.S < 1 or self.A < 1 or self.L < 1:
            raise ConfigError("S, A and L must be positive")
        if not (self.O > 0 and self.T > 0):
            raise ConfigError("O and T must be positive durations")
        if not 0 < self.load_factor <= 1:
            raise ConfigError("load_factor must be in (0, 1]")
        if self.rotation not in ("independent", "fleet"):
            raise ConfigError("rotation must be 'independent' or 'fleet'")
        return self

    @property
    def salt_bytes(self) -> bytes:
        return self.app_salt.encode("utf-8")

    @classmethod
    def from_section(cls, sec, base_dir: Path | None = None) -> "AgentConfig":
        cfg = cls()
        for f in fields(cls):
            if f.name not in sec:
                continue
            raw = sec[f.name]
            default = getattr(cfg, f.name)
            try:
                if f.name in ("O", "T"):
                    val = parse_duration(raw)
                elif isinstance(default, int):
                    val = int(raw)
                elif isinstance(default, float):
                    val = float(raw)
                else:
                    val = raw
            except ValueError:
                raise ConfigError(f"bad value for {f.name}: {raw!r}") from None
            setattr(cfg, f.name, val)
        if cfg.registry and base_dir is not None and not Path(cfg.registry).is_absolute():
            cfg.registry = str(base_dir / cfg.registry)
        return cfg.validate()

    @classmethod
    def load(cls, path: str | Path) -> "AgentConfig":
        cp = _read(path)
        sec = cp["agent"] if cp.has_section("agent") else {}
        return cls.from_section(sec, Path(path).parent)


@dataclass
class ServerConfig:
    report_interval: float = DEFAULT_DELTA_S
    mode: str = "windowed"
    tau: float = 0.85
    queue_bound: int = 1024
    root_seed_id: int = 1

    def validate(self) -> "ServerConfig":
        if self.mode not in ("windowed", "cumulative"):
            raise ConfigError("mode must be 'windowed' or 'cumulative'")
        if not 0 < self.tau <= 1:
            raise ConfigError("tau must be in (0, 1]")
        if self.report_interval <= 0 or self.queue_bound < 1:
            raise ConfigError("report_interval and queue_bound must be positive")
        return self
