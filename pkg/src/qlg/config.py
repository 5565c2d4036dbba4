"""Plain-text run configuration: ``key = value`` lines, '#' comments."""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

from qlg.evolution import SimParams
from qlg.initcond import DEFAULT_RESCALE
from qlg.lattice import GridSpec
from qlg.spectral import parse_windows


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class RunConfig:
    grid: tuple[int, int, int] = (64, 64, 64)
    layout: str = "twelve"
    winding: int = 1
    amplitude_rescale: float = DEFAULT_RESCALE
    g: float = 1.0
    a: float = 0.04
    phase_scale: float = 0.1
    n_steps: int = 1000
    hook_every: int = 10
    output_dir: str = "out"
    checkpoint_every: int = 0
    snapshot_every: int = 0
    recurrence_threshold: float = 0.9
    core_fraction: float = 0.13
    norm_tolerance: float = 1e-9
    fit_windows: tuple[tuple[int, int], ...] = ((4, 12), (14, 24))

    def __post_init__(self):
        try:
            GridSpec(*self.grid)
        except ValueError as exc:
            raise ValueError(f"grid {exc}") from None
        self.params  # validates g, a, phase_scale
        if self.winding not in (1, 2):
            raise ValueError("winding must be 1 or 2")
        if not self.amplitude_rescale > 0:
            raise ValueError("amplitude_rescale must be > 0")
        if self.hook_every < 1:
            raise ValueError("hook_every must be >= 1")
        for name in ("n_steps", "checkpoint_every", "snapshot_every"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("recurrence_threshold", "core_fraction"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.norm_tolerance > 0:
            raise ValueError("norm_tolerance must be > 0")
        prev = 0
        for lo, hi in self.fit_windows:
            if not prev < lo < hi:
                raise ValueError("fit_windows must be ordered, non-overlapping, with 0 < lo < hi")
            prev = hi

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec(*self.grid)

    @property
    def params(self) -> SimParams:
        return SimParams(g=self.g, a=self.a, phase_scale=self.phase_scale, steps_per_output=self.hook_every)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def physics_hash(self) -> str:
        """Digest of every setting that changes the evolved state."""
        keys = ("grid", "layout", "winding", "amplitude_rescale", "g", "a", "phase_scale")
        text = "\n".join(f"{k}={_format(getattr(self, k))}" for k in keys)
        if self.layout not in ("twelve", "fortyeight"):
            try:
                text += "\n" + Path(self.layout).read_text()
            except OSError:
                pass
        return hashlib.sha256(text.encode()).hexdigest()


def _format(v) -> str:
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return ",".join(f"{lo}:{hi}" for lo, hi in v)
    if isinstance(v, tuple):
        return " ".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _int(s: str) -> int:
    return int(s)


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _grid(s: str) -> tuple[int, int, int]:
    parts = s.split()
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ValueError(f"grid needs 1 or 3 integers, got {len(parts)}")
    return tuple(int(p) for p in parts)


def _windows(s: str):
    return tuple(parse_windows(s))


PARSERS = {
    "grid": _grid,
    "layout": str,
    "winding": _int,
    "amplitude_rescale": _float,
    "g": _float,
    "a": _float,
    "phase_scale": _float,
    "n_steps": _int,
    "hook_every": _int,
    "output_dir": str,
    "checkpoint_every": _int,
    "snapshot_every": _int,
    "recurrence_threshold": _float,
    "core_fraction": _float,
    "norm_tolerance": _float,
    "fit_windows": _windows,
}


def parse_config(text: str, **overrides) -> RunConfig:
    """Parse config text; unknown keys, bad values and duplicates raise ConfigError."""
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        try:
            values[key] = PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**values)
    except ValueError as exc:
        # messages start with the offending key
        msg = str(exc)
        line = lines.get(msg.split()[0])
        raise ConfigError(msg, line) from None
