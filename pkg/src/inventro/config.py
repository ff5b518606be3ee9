"""Run configuration: ``key = value`` text files and built-in presets."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

from .abstraction import DEFAULT_MAX_CELLS, DEFAULT_SNAP_TOL
from .determinizer import DETERMINIZERS
from .entropy import DEFAULT_MAX_SUBSETS
from .errors import ConfigError
from .interval import IntervalBox
from .oracle import DEFAULT_MAX_ORACLE_NODES
from .system import BUILTINS, DEFAULT_SUBSTEPS, builtin

REQUIRED = ("system", "eta_s", "eta_i")
GRID_MODES = ("tile", "lattice")


@dataclass
class RunConfig:
    system: str
    eta_s: tuple
    eta_i: tuple
    b: float | None = None
    rho: float | None = None
    eps: float | None = None
    Ts: float | None = None
    substeps: int = DEFAULT_SUBSTEPS
    domain: tuple | None = None
    determinizer: str = "maxfreq"
    grid: str = "tile"
    columns: tuple | None = None
    intersect_reversed: bool = False
    max_cells: int = DEFAULT_MAX_CELLS
    max_oracle_nodes: int = DEFAULT_MAX_ORACLE_NODES
    max_subsets: int = DEFAULT_MAX_SUBSETS
    snap_tol: float = DEFAULT_SNAP_TOL
    output_dir: str = "inventro-out"
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    report_timings: bool = False

    def model(self, reversed=False):
        """The configured system (or its time reversal) as a model object."""
        params = {k: getattr(self, k) for k in ("b", "rho", "eps", "Ts") if getattr(self, k) is not None}
        params["substeps"] = self.substeps
        name = self.system
        if reversed:
            if self.system != "henon":
                raise ConfigError(f"no time-reversed model for system {self.system!r}")
            name = "henon-reversed"
        return builtin(name, **params)

    def domain_box(self, model):
        if self.domain is None:
            return model.safe_set
        n = len(self.domain) // 2
        return IntervalBox(self.domain[0::2][:n], self.domain[1::2][:n])


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _positive_int(text):
    v = int(float(text))
    if v != float(text):
        raise ValueError(f"expected an integer, got {text!r}")
    return v


_PARSERS = {
    "system": str,
    "eta_s": _floats,
    "eta_i": _floats,
    "b": float,
    "rho": float,
    "eps": float,
    "Ts": float,
    "substeps": _positive_int,
    "domain": _floats,
    "determinizer": str,
    "grid": str,
    "columns": _floats,
    "intersect_reversed": _bool,
    "max_cells": _positive_int,
    "max_oracle_nodes": _positive_int,
    "max_subsets": _positive_int,
    "snap_tol": float,
    "output_dir": str,
    "threads": _positive_int,
    "report_timings": _bool,
}

_SYSTEM_PARAMS = {"linear2d": (), "pendulum": ("b", "rho", "Ts"), "henon": ("eps",)}


def parse_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated `RunConfig`."""
    values, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line=lineno)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", line=lineno) from None
        where[key] = lineno
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    cfg = RunConfig(**values)
    _validate(cfg, where)
    return cfg


def _validate(cfg, where):
    def fail(key, msg):
        raise ConfigError(msg, line=where.get(key))

    if cfg.system not in _SYSTEM_PARAMS:
        fail("system", f"system must be one of {', '.join(_SYSTEM_PARAMS)}, got {cfg.system!r}")
    if cfg.determinizer not in DETERMINIZERS:
        fail("determinizer", f"determinizer must be one of {', '.join(DETERMINIZERS)}, got {cfg.determinizer!r}")
    if cfg.grid not in GRID_MODES:
        fail("grid", f"grid must be one of {', '.join(GRID_MODES)}, got {cfg.grid!r}")
    for key in _SYSTEM_PARAMS[cfg.system]:
        if getattr(cfg, key) is None:
            fail("system", f"system {cfg.system} needs parameter {key!r}")
    for key in ("eta_s", "eta_i", "columns", "domain"):
        v = getattr(cfg, key)
        if v is not None and len(v) == 0:
            fail(key, f"{key} needs at least one number")
    for key in ("eta_s", "eta_i"):
        if any(v <= 0 for v in getattr(cfg, key)):
            fail(key, f"{key} must be positive")
    for key in ("b", "eps", "Ts", "snap_tol"):
        v = getattr(cfg, key)
        if v is not None and not v > 0:
            fail(key, f"{key} must be positive, got {v}")
    if cfg.rho is not None and not cfg.rho > 0:
        fail("rho", f"rho must be positive, got {cfg.rho}")
    for key in ("substeps", "max_cells", "max_oracle_nodes", "max_subsets", "threads"):
        if getattr(cfg, key) < 1:
            fail(key, f"{key} must be >= 1")
    if cfg.domain is not None and len(cfg.domain) % 2:
        fail("domain", "domain needs lower/upper pairs: lo1 hi1 lo2 hi2 ...")
    if cfg.intersect_reversed and cfg.system != "henon":
        fail("intersect_reversed", "intersect_reversed is only available for the henon system")
    if cfg.system not in BUILTINS:
        fail("system", f"unknown system {cfg.system!r}")
    env = os.environ.get("INVENTRO_THREADS")
    if env:
        try:
            cfg.threads = max(1, int(env))
        except ValueError:
            raise ConfigError(f"INVENTRO_THREADS must be an integer, got {env!r}") from None


def config_text(cfg):
    """Inverse of `parse_config` for the keys that differ from their defaults."""
    lines = []
    default = RunConfig(system=cfg.system, eta_s=cfg.eta_s, eta_i=cfg.eta_i)
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name in ("threads",) or (f.name not in REQUIRED and v == getattr(default, f.name)):
            continue
        if isinstance(v, tuple):
            v = " ".join(repr(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


PRESETS = {
    "linear2d-coarse": """\
system = linear2d
eta_s = 0.57142
eta_i = 0.005
columns = 1 0 -1
""",
    "linear2d-coarse-lattice": """\
system = linear2d
eta_s = 0.57142
eta_i = 0.005
grid = lattice
""",
    "linear2d-maxfreq": """\
system = linear2d
eta_s = 0.01 0.01
eta_i = 0.5
determinizer = maxfreq
""",
    "linear2d-minnorm": """\
system = linear2d
eta_s = 0.01 0.01
eta_i = 0.5
determinizer = minnorm
""",
    "pendulum-0.8": """\
system = pendulum
b = 1
rho = 1
Ts = 0.8
eta_s = 1e-5
eta_i = 0.2
""",
    "pendulum-0.5": """\
system = pendulum
b = 1
rho = 1
Ts = 0.5
eta_s = 1e-5
eta_i = 0.2
""",
    "pendulum-0.1": """\
system = pendulum
b = 1
rho = 1
Ts = 0.1
eta_s = 1e-5
eta_i = 0.2
""",
    "pendulum-b10": """\
system = pendulum
b = 10
rho = 50
Ts = 0.1
eta_s = 1e-6
eta_i = 10
""",
    "henon": """\
system = henon
eps = 0.009
eta_s = 0.02
eta_i = 0.003
intersect_reversed = true
""",
    "henon-fine": """\
system = henon
eps = 0.009
eta_s = 0.0021
eta_i = 0.003
intersect_reversed = true
grid = lattice
""",
}


def preset(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    return parse_config(PRESETS[name])
