"""Run configuration and its flat ``key = value`` text format.

Rates are given as ratios to the Rabi frequency, which is the internal unit.
The same format is used for config files and for the manifest written next
to every output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .model import SystemParams

MODES = (
    "spectrum-analytic",
    "spectrum-resolvent",
    "spectrum-trajectory",
    "sde-validate",
    "trajectory-phases",
    "cos-correlation",
    "figure-preset",
    "validate",
)
PRESETS = tuple(f"fig{k}" for k in range(1, 8))


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on.  Times are in units of ``1/Omega``.

    ``None`` for ``t_end``, ``dt`` or ``n_traj`` selects the mode's default,
    which is written to the manifest once resolved.
    """

    mode: str = "spectrum-resolvent"
    preset: str | None = None
    gamma: float = 0.05
    Gamma: float = 0.0
    L: float = 0.0
    Delta: float = 0.0
    omega_min: float = -10.0
    omega_max: float = 10.0
    omega_points: int = 2001
    t_end: float | None = None
    dt: float | None = None
    sample_dt: float = 0.05
    tau_max: float = 2.0
    n_traj: int | None = None
    seed: int = 0
    workers: int = 1
    out: str = "out"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.mode == "figure-preset" and self.preset is None:
            raise ConfigError("mode figure-preset needs a preset (fig1..fig7)")
        if self.preset is not None and self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        for name in ("gamma", "Gamma", "L", "Delta", "omega_min", "omega_max", "sample_dt",
                     "tau_max"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        for name in ("gamma", "Gamma", "L"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.omega_points < 2 or self.omega_max <= self.omega_min:
            raise ConfigError("omega grid needs points >= 2 and max > min")
        if self.sample_dt <= 0 or self.tau_max < 0:
            raise ConfigError("sample_dt must be > 0 and tau_max >= 0")
        if self.t_end is not None and not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.n_traj is not None and self.n_traj < 1:
            raise ConfigError("n_traj must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def params(self) -> SystemParams:
        return SystemParams.from_ratios(self.gamma, self.Gamma, self.L, self.Delta)

    def with_(self, **changes) -> RunConfig:
        return replace(self, **changes)


_INT_KEYS = {"omega_points", "n_traj", "seed", "workers"}
_FLOAT_KEYS = {"gamma", "Gamma", "L", "Delta", "omega_min", "omega_max", "t_end", "dt",
               "sample_dt", "tau_max"}


def _key(name: str) -> str:
    """File keys use the CLI spelling (``n-traj``); field names use underscores."""
    return name.replace("_", "-")


def _field(key: str) -> str:
    return key.strip().replace("-", "_")


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(name: str, text: str):
    text = text.strip()
    if text.lower() == "none":
        return None
    try:
        if name in _INT_KEYS:
            return int(text)
        if name in _FLOAT_KEYS:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc
    return text


def parse_omega(text: str) -> tuple[float, float, int]:
    """``"lo,hi,points"`` into its parts."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"omega grid must be 'lo,hi,points', got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad omega grid {text!r}") from exc


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        name = _field(key)
        if "." in name:
            continue  # namespaced manifest entries (resolved values, results)
        if name == "omega":
            out["omega_min"], out["omega_max"], out["omega_points"] = parse_omega(value)
            continue
        if name not in known:
            raise ConfigError(f"line {lineno}: unknown key {key.strip()!r}")
        out[name] = parse_value(name, value)
    return out


def load_config(path: str | Path) -> RunConfig:
    return RunConfig(**parse_config_text(Path(path).read_text(encoding="utf-8")))


def dump_config(cfg: RunConfig, extra: dict | None = None) -> str:
    """Serialize to the key-value format.

    ``extra`` entries are appended as-is; give them dotted keys
    (``resolved.dt``) so that the text still parses back to the same config.
    """
    lines = [f"{_key(f.name)} = {format_value(getattr(cfg, f.name))}" for f in fields(RunConfig)]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {format_value(v)}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> RunConfig:
    return RunConfig(**parse_config_text(text))
