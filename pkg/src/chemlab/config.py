"""TOML run configuration: schema, defaults, validation and problem assembly.

Sections and keys::

    [model]  n, R, mode, alpha, beta, K_D, k_S, k_D, M, s0, table
    [grid]   cells
    [time]   t_end, dt_init, dt_min, dt_max, cfl, stride
    [limits] u_max, nonneg_tol, growth_cap
    [init]   family, m, eps_mass, eta, rho, gamma, kappa, N_psi, theta_log, width
    [output] dir, emit_svg, lp

``n``, ``R``, ``alpha``, ``beta`` and ``m`` are required.  ``K_D``, ``k_S``,
``k_D`` and ``N_psi`` may also be spelled in lowercase.  Every error is a
:class:`ConfigError` whose message starts with the offending key path.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .grid import build_grid
from .initdata import FAMILIES, InitFamilyParams, make_initial
from .kinetics import Kinetics
from .simulator import TimeControls
from .state import State


class ConfigError(ValueError):
    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


@dataclass(frozen=True)
class ModelConfig:
    n: int
    R: float
    alpha: float
    beta: float
    mode: str = "prototype"
    K_D: float = 1.0
    k_S: float = 1.0
    k_D: float | None = None
    M: float | None = None
    s0: float = 2.0
    table: str | None = None


@dataclass(frozen=True)
class GridConfig:
    cells: int = 512


@dataclass(frozen=True)
class TimeConfig:
    t_end: float = 5.0
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    cfl: float = 0.4
    stride: int = 10


@dataclass(frozen=True)
class LimitsConfig:
    u_max: float = 1e8
    nonneg_tol: float = 1e-13
    growth_cap: float = 0.2


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "runs"
    emit_svg: bool = True
    lp: float = 4.0


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    grid: GridConfig = field(default_factory=GridConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    init: InitFamilyParams = field(default_factory=InitFamilyParams)
    output: OutputConfig = field(default_factory=OutputConfig)
    extra: dict = field(default_factory=dict, compare=False)
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "model": asdict(self.model),
            "grid": asdict(self.grid),
            "time": asdict(self.time),
            "limits": asdict(self.limits),
            "init": asdict(self.init),
            "output": asdict(self.output),
        }

    @property
    def run_id(self) -> str:
        """Hash of the resolved physics/numerics (output settings excluded)."""
        d = self.to_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def controls(self) -> TimeControls:
        t, lim = self.time, self.limits
        return TimeControls(t.dt_init, t.dt_min, t.dt_max, t.cfl, t.t_end,
                            lim.u_max, lim.growth_cap, lim.nonneg_tol)

    def with_overrides(self, **section_updates) -> "RunConfig":
        """``cfg.with_overrides(model={"alpha": 1.0}, init={"eta": 0.1})``, revalidated."""
        d = {sec: dict(body) for sec, body in self.source.items()}
        for sec, upd in section_updates.items():
            d.setdefault(sec, {}).update(upd)
        return from_dict(d)


SECTIONS = {
    "model": ModelConfig,
    "grid": GridConfig,
    "time": TimeConfig,
    "limits": LimitsConfig,
    "init": InitFamilyParams,
    "output": OutputConfig,
}
REQUIRED = {"model": ("n", "R", "alpha", "beta"), "init": ("m",)}
ALIASES = {"k_d": "K_D", "k_s": "k_S", "kd_floor": "k_D", "n_psi": "N_psi"}
# sections that belong to other subcommands and are passed through untouched
PASSTHROUGH = ("sweep", "stationary")

_INT_KEYS = {"n", "cells", "stride", "N_psi"}
_BOOL_KEYS = {"emit_svg"}
_STR_KEYS = {"mode", "family", "dir", "table"}


def _coerce(key_path, name, value):
    if name in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(key_path, "expected true or false")
        return value
    if name in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(key_path, "expected a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key_path, "expected a number")
    if name in _INT_KEYS:
        if float(value) != int(value):
            raise ConfigError(key_path, "expected an integer")
        return int(value)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(key_path, "must be finite")
    return value


def _section(name, raw):
    cls = SECTIONS[name]
    known = {f.name for f in fields(cls)}
    kw = {}
    for key, value in raw.items():
        canon = ALIASES.get(key, key) if key not in known else key
        path = f"{name}.{key}"
        if canon not in known:
            raise ConfigError(path, "unknown key")
        if canon in kw:
            raise ConfigError(path, "given twice (alias)")
        kw[canon] = _coerce(path, canon, value)
    for req in REQUIRED.get(name, ()):
        if req not in kw:
            raise ConfigError(f"{name}.{req}", "missing required key")
    return kw


def parse_config(text: str) -> RunConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<document>", f"not valid TOML ({exc})") from None
    return from_dict(raw)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    cfg = parse_config(text)
    if cfg.model.table and not Path(cfg.model.table).is_absolute():
        cfg = replace(cfg, model=replace(cfg.model, table=str(Path(path).parent / cfg.model.table)))
    return cfg


def from_dict(raw: dict) -> RunConfig:
    for sec, body in raw.items():
        if sec in PASSTHROUGH:
            continue
        if sec not in SECTIONS:
            raise ConfigError(sec, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(sec, "expected a table")
    for sec in REQUIRED:
        if sec not in raw:
            raise ConfigError(f"{sec}.{REQUIRED[sec][0]}", "missing required key")
    parts = {sec: _section(sec, raw.get(sec, {})) for sec in SECTIONS}
    extra = {sec: dict(raw[sec]) for sec in PASSTHROUGH if sec in raw}
    model = ModelConfig(**parts["model"])
    cfg = RunConfig(
        model=model,
        grid=GridConfig(**parts["grid"]),
        time=TimeConfig(**parts["time"]),
        limits=LimitsConfig(**parts["limits"]),
        init=InitFamilyParams(**parts["init"]),
        output=OutputConfig(**parts["output"]),
        extra=extra,
        source={sec: dict(body) for sec, body in raw.items()},
    )
    return validate(cfg)


def validate(cfg: RunConfig) -> RunConfig:
    """Check every parameter invariant up front; returns the config with derived init defaults."""
    m = cfg.model
    if m.n < 2:
        raise ConfigError("model.n", "space dimension must be >= 2")
    if not m.R > 0:
        raise ConfigError("model.R", "must be positive")
    if m.mode not in ("prototype", "tabulated"):
        raise ConfigError("model.mode", "must be 'prototype' or 'tabulated'")
    if m.mode == "tabulated" and not m.table:
        raise ConfigError("model.table", "tabulated kinetics need a table file")
    for key in ("K_D", "k_S", "s0"):
        if not getattr(m, key) > 0:
            raise ConfigError(f"model.{key}", "must be positive")
    if m.k_D is not None and not m.k_D > 0:
        raise ConfigError("model.k_D", "must be positive")
    if m.M is not None and m.M < 0:
        raise ConfigError("model.M", "must be >= 0")
    if cfg.grid.cells < 8:
        raise ConfigError("grid.cells", "need at least 8 cells")
    t = cfg.time
    for key in ("t_end", "dt_init", "dt_min", "dt_max"):
        if not getattr(t, key) > 0:
            raise ConfigError(f"time.{key}", "must be positive")
    if not t.dt_min <= t.dt_init:
        raise ConfigError("time.dt_init", "must be >= time.dt_min")
    if not t.dt_init <= t.dt_max:
        raise ConfigError("time.dt_init", "must be <= time.dt_max")
    if not 0 < t.cfl < 1:
        raise ConfigError("time.cfl", "must lie in (0, 1)")
    if t.stride < 1:
        raise ConfigError("time.stride", "must be >= 1")
    lim = cfg.limits
    if not lim.u_max > 0:
        raise ConfigError("limits.u_max", "must be positive")
    if lim.nonneg_tol < 0:
        raise ConfigError("limits.nonneg_tol", "must be >= 0")
    if not lim.growth_cap > 0:
        raise ConfigError("limits.growth_cap", "must be positive")
    if cfg.output.lp < 1:
        raise ConfigError("output.lp", "must be >= 1")
    if cfg.init.family not in FAMILIES:
        raise ConfigError("init.family", f"must be one of {', '.join(FAMILIES)}")
    try:
        init = cfg.init.resolved(m.n, m.R)
    except ValueError as exc:
        key, _, reason = str(exc).partition(": ")
        raise ConfigError(f"init.{key}", reason) from None
    if m.mode == "prototype":
        try:
            Kinetics(m.alpha, m.beta, m.K_D, m.k_S, k_D=m.k_D, M=m.M)
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
    return replace(cfg, init=init)


def build_kinetics(m: ModelConfig) -> Kinetics:
    if m.mode == "prototype":
        return Kinetics(m.alpha, m.beta, m.K_D, m.k_S, k_D=m.k_D, M=m.M)
    try:
        data = np.loadtxt(m.table, delimiter=",", comments="#", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError("model.table", f"cannot read table ({exc})") from None
    if data.shape[1] != 3:
        raise ConfigError("model.table", "expected three columns s, D, S")
    try:
        return Kinetics(K_D=m.K_D, k_S=m.k_S, k_D=m.k_D, M=m.M, mode="tabulated",
                        table=(data[:, 0], data[:, 1], data[:, 2]))
    except ValueError as exc:
        raise ConfigError("model.table", str(exc)) from None


@dataclass
class Problem:
    grid: object
    kin: Kinetics
    state0: State
    controls: TimeControls


def build_problem(cfg: RunConfig) -> Problem:
    m = cfg.model
    g = build_grid(m.n, m.R, cfg.grid.cells)
    kin = build_kinetics(m)
    try:
        u, v, w = make_initial(g, cfg.init)
    except ValueError as exc:
        key, _, reason = str(exc).partition(": ")
        raise ConfigError(f"init.{key}", reason) from None
    return Problem(g, kin, State(g, 0.0, u, v, w), cfg.controls())
