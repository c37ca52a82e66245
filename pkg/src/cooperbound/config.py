"""Run configuration: a sectioned ``key = value`` file with typed, validated fields.

Every field has a default, so an empty file is a valid configuration.
Unknown sections or keys are rejected with their location.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Callable

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "COMMANDS", "parse_config", "emit_config"]

COMMANDS = ("bound", "simulate", "verify", "scan")


class ConfigError(ValueError):
    pass


def _ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(p) for p in text.split(",")) if text else ()


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(p) for p in text.split(",")) if text else ()


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _choice(*opts):
    return lambda x: x in opts


# section -> key -> (parser, default, validator or None, description of the valid range)
Field = tuple[Callable[[str], Any], Any, Callable[[Any], bool] | None, str]
SCHEMA: dict[str, dict[str, Field]] = {
    "run": {
        "command": (str, "", _choice("", *COMMANDS), f"one of {COMMANDS}"),
        "seed": (int, 0, _nonneg, ">= 0"),
    },
    "lattice": {
        "dim": (int, 1, lambda d: 1 <= d <= 4, "1..4"),
        "L": (int, 1, lambda n: n >= 1, ">= 1"),
        "shape": (_ints, (), lambda s: all(n >= 2 for n in s), "extents >= 2"),
    },
    "model": {
        "t": (float, 1.0, None, ""),
        "U": (float, 0.0, None, ""),
        "V": (float, 0.0, None, ""),
        "mu": (float, 0.0, None, ""),
    },
    "couplings": {
        "kappa": (float, 1.0, _nonneg, ">= 0"),
        "alpha": (float, 1.0, _positive, "> 0"),
        "beta": (float, 1.0, _nonneg, ">= 0"),
        "flux_frozen": (_bool, False, None, ""),
    },
    "observable": {
        "u": (_ints, (), None, ""),
        "v": (_ints, (), None, ""),
    },
    "sampler": {
        "delta": (float, math.pi / 2, lambda d: 0 < d <= math.pi, "in (0, pi]"),
        "sweeps": (int, 1000, lambda n: n >= 1, ">= 1"),
        "thermalization": (int, 200, _nonneg, ">= 0"),
        "chains": (int, 4, lambda n: n >= 1, ">= 1"),
        "tune": (_bool, True, None, ""),
        "target_acceptance": (float, 0.4, lambda a: 0 < a < 1, "in (0, 1)"),
        "bins": (int, 32, lambda n: n >= 2, ">= 2"),
    },
    "quadrature": {
        "nodes": (int, 32, lambda n: n >= 2, ">= 2"),
        "tol": (float, 1e-8, _positive, "> 0"),
        "compare_exact": (_bool, False, None, ""),
    },
    "bound": {
        "theorem": (str, "classical", _choice("classical", "quantum"), "classical or quantum"),
        "D": (int, 3, _choice(3, 4), "3 or 4"),
        "beta": (float, 1.0, _positive, "> 0"),
        "alpha": (float, 1.0, _positive, "> 0"),
        "eps": (float, 1e-3, lambda e: 0 < e < math.pi, "in (0, pi)"),
        "K": (float, math.pi, lambda k: 0 < k <= math.pi, "in (0, pi]"),
        "u": (_ints, (8, 0, 0), None, ""),
        "v": (_ints, (), None, ""),
    },
    "scan": {
        "axis": (str, "u", _choice("u", "beta", "alpha", "eps"), "u, beta, alpha or eps"),
        "values": (_floats, (8.0, 16.0, 32.0, 64.0), lambda v: len(v) >= 1, "non-empty list"),
    },
    "verify": {
        "n_random": (int, 50, lambda n: n >= 0, ">= 0"),
        "trace_trials": (int, 1000, lambda n: n >= 1, ">= 1"),
    },
}


@dataclass
class RunConfig:
    """Fully materialized configuration; ``sections[name][key]`` holds typed values."""

    sections: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    @property
    def command(self) -> str:
        return self.sections["run"]["command"]

    @property
    def seed(self) -> int:
        return self.sections["run"]["seed"]

    def to_dict(self) -> dict:
        return {s: {k: list(v) if isinstance(v, tuple) else v for k, v in kv.items()}
                for s, kv in self.sections.items()}


def _defaults() -> dict[str, dict[str, Any]]:
    return {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}


def parse_config(text: str, overrides: dict[str, dict[str, Any]] | None = None) -> RunConfig:
    """Parse config text; ``overrides`` (already typed) are applied after parsing."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = _defaults()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            parser = SCHEMA[section][key][0]
            try:
                values[section][key] = parser(raw)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
    for section, kv in (overrides or {}).items():
        values[section].update(kv)
    for section, keys in SCHEMA.items():
        for key, (_, _, check, desc) in keys.items():
            if check is not None and not check(values[section][key]):
                raise ConfigError(f"[{section}] {key} = {values[section][key]!r} out of range ({desc})")
    return RunConfig(values)


def emit_config(config: RunConfig) -> str:
    """Text form that :func:`parse_config` maps back to an equal config."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(config.sections[section][key])}")
        lines.append("")
    return "\n".join(lines)
