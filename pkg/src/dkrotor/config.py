"""Plain-text run configuration: key = value with sections.

The format is INI-style and diff-able; ``dkrotor defaults`` dumps every
default explicitly.  Validation errors carry the file and line of the
offending key.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .model import DEFAULT_KBAR

__all__ = ["RunConfig", "ConfigError", "load_config", "default_config_text"]


class ConfigError(ValueError):
    """Configuration rejected; message carries file:line when known."""


_SCHEMA = {
    # section -> key -> (type, default)
    "system": {
        "K": (float, 10.0),
        "kbar": (float, DEFAULT_KBAR),
        "beta": (float, 0.0),
        "M": (int, 256),
        "pulse_width": (float, 0.0),
        "substeps": (int, 8),
    },
    "drive": {
        "r": (float, 1.0),
        "lambda0": (float, 0.5),
        "N": (int, 100),
    },
    "run": {
        "seed": (int, 0),
        "workers": (int, 1),
        "lambda0_ensemble": (int, 4),
        "beta_ensemble": (int, 1),
        "p0_window": (int, 0),
    },
    "scan": {
        "r_min": (float, 0.98),
        "r_max": (float, 1.02),
        "r_count": (int, 41),
    },
    "level_dynamics": {
        "lambda_min": (float, 0.0),
        "lambda_max": (float, 1.0),
        "lambda_count": (int, 201),
        "min_step": (float, 1e-4),
        "weight_threshold_thin": (float, 1e-4),
        "weight_threshold_thick": (float, 1e-2),
    },
    "classical": {
        "ensemble_size": (int, 100_000),
        "n_periods": (int, 30),
    },
}


@dataclass
class RunConfig:
    """Flat view of every configurable knob, with provenance for kbar."""

    K: float = 10.0
    kbar: float = DEFAULT_KBAR
    beta: float = 0.0
    M: int = 256
    pulse_width: float = 0.0
    substeps: int = 8
    r: float = 1.0
    lambda0: float = 0.5
    N: int = 100
    seed: int = 0
    workers: int = 1
    lambda0_ensemble: int = 4
    beta_ensemble: int = 1
    p0_window: int = 0
    r_min: float = 0.98
    r_max: float = 1.02
    r_count: int = 41
    lambda_min: float = 0.0
    lambda_max: float = 1.0
    lambda_count: int = 201
    min_step: float = 1e-4
    weight_threshold_thin: float = 1e-4
    weight_threshold_thick: float = 1e-2
    ensemble_size: int = 100_000
    n_periods: int = 30
    kbar_source: str = "cesium-default"

    def validate(self, where=lambda key: "") -> None:
        def bad(key: str, msg: str):
            raise ConfigError(f"{where(key)}{msg}")

        if self.K < 0:
            bad("K", f"[system] K must be >= 0, got {self.K}")
        if self.kbar <= 0:
            bad("kbar", f"[system] kbar must be > 0, got {self.kbar}")
        if not 0 <= self.beta < 1:
            bad("beta", f"[system] beta must be in [0, 1), got {self.beta}")
        if self.M < 8:
            bad("M", f"[system] M must be >= 8, got {self.M}")
        if not 0 <= self.pulse_width < 0.5:
            bad("pulse_width", f"[system] pulse_width must be in [0, 0.5), got {self.pulse_width}")
        if self.substeps < 1:
            bad("substeps", f"[system] substeps must be >= 1, got {self.substeps}")
        if self.r <= 0:
            bad("r", f"[drive] r must be > 0, got {self.r}")
        if not 0 <= self.lambda0 < 1:
            bad("lambda0", f"[drive] lambda0 must be in [0, 1), got {self.lambda0}")
        if self.N < 1:
            bad("N", f"[drive] N must be >= 1, got {self.N}")
        if self.workers < 1:
            bad("workers", f"[run] workers must be >= 1, got {self.workers}")
        if self.lambda0_ensemble < 1:
            bad("lambda0_ensemble", f"[run] lambda0_ensemble must be >= 1, got {self.lambda0_ensemble}")
        if self.beta_ensemble < 1:
            bad("beta_ensemble", f"[run] beta_ensemble must be >= 1, got {self.beta_ensemble}")
        if self.p0_window < 0 or self.p0_window > self.M:
            bad("p0_window", f"[run] p0_window must be in [0, M], got {self.p0_window}")
        if self.r_count < 2:
            bad("r_count", f"[scan] r_count must be >= 2, got {self.r_count}")
        if not self.r_min < self.r_max:
            bad("r_min", f"[scan] r_min must be < r_max, got {self.r_min} >= {self.r_max}")
        if self.lambda_count < 2:
            bad("lambda_count", f"[level_dynamics] lambda_count must be >= 2, got {self.lambda_count}")
        if not self.min_step > 0:
            bad("min_step", f"[level_dynamics] min_step must be > 0, got {self.min_step}")
        if not 0 <= self.lambda_min < self.lambda_max <= 1.0:
            bad("lambda_min", "[level_dynamics] need 0 <= lambda_min < lambda_max <= 1")
        if not 0 < self.weight_threshold_thin <= self.weight_threshold_thick:
            bad("weight_threshold_thin", "[level_dynamics] need 0 < thin <= thick thresholds")
        if self.ensemble_size < 1000:
            bad("ensemble_size", f"[classical] ensemble_size must be >= 1e3, got {self.ensemble_size}")
        if self.n_periods < 2:
            bad("n_periods", f"[classical] n_periods must be >= 2, got {self.n_periods}")

    def lambda0_values(self) -> tuple[float, ...]:
        """Evenly spaced ensemble offsets, or the single configured lambda0."""
        n = self.lambda0_ensemble
        if n <= 1:
            return (self.lambda0,)
        return tuple((i + 0.5) / n for i in range(n))

    def beta_values(self) -> tuple[float, ...]:
        """Uniform quasimomentum grid, or the single configured beta."""
        n = self.beta_ensemble
        if n <= 1:
            return (self.beta,)
        return tuple((i + 0.5) / n for i in range(n))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """First line number of each (section, key) in the INI text."""
    lines = {}
    section = ""
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
        elif "=" in line:
            key = line.split("=", 1)[0].strip()
            lines.setdefault((section, key), i)
    return lines


def load_config(path: str | None = None, text: str | None = None) -> RunConfig:
    """Parse and validate a config file; defaults fill unspecified keys.

    Raises :class:`ConfigError` with file:line context for unknown keys,
    type errors, and constraint violations.
    """
    name = path or "<config>"
    if text is None:
        if path is None:
            return RunConfig()
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    key_lines = _key_lines(text)

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case-sensitive (K, M, N)
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    def where(section):
        def fmt(key):
            line = key_lines.get((section, key))
            return f"{name}:{line}: " if line else f"{name}: "
        return fmt

    values: dict[str, object] = {}
    kbar_explicit = False
    for section in parser.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            raise ConfigError(f"{name}: unknown section [{section}]")
        for key, raw in parser.items(sec):
            if key not in _SCHEMA[sec]:
                line = key_lines.get((sec, key))
                loc = f"{name}:{line}: " if line else f"{name}: "
                raise ConfigError(f"{loc}unknown key '{key}' in [{sec}]")
            typ, _default = _SCHEMA[sec][key]
            try:
                values[key] = typ(raw)
            except ValueError:
                line = key_lines.get((sec, key))
                loc = f"{name}:{line}: " if line else f"{name}: "
                raise ConfigError(
                    f"{loc}[{sec}] {key} must be {typ.__name__}, got {raw!r}"
                ) from None
            if sec == "system" and key == "kbar":
                kbar_explicit = True

    cfg = RunConfig(**values)
    cfg.kbar_source = "config" if kbar_explicit else "cesium-default"

    def locate(key):
        for sec, keys in _SCHEMA.items():
            if key in keys:
                line = key_lines.get((sec, key))
                return f"{name}:{line}: " if line else f"{name}: "
        return f"{name}: "

    cfg.validate(where=locate)
    return cfg


def default_config_text() -> str:
    """INI dump of every default; ``dkrotor defaults`` prints this."""
    out = io.StringIO()
    out.write("# dkrotor run configuration (all values are the defaults)\n")
    for section, keys in _SCHEMA.items():
        out.write(f"\n[{section}]\n")
        for key, (_typ, default) in keys.items():
            if isinstance(default, float):
                out.write(f"{key} = {default!r}\n")
            else:
                out.write(f"{key} = {default}\n")
    return out.getvalue()
