"""Flat ``key = value`` run configuration.

Lists are comma separated; segments are ``;``-separated groups of variable
names, e.g. ``segments = a, b; c, d``. Unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, fields, replace
from typing import get_type_hints

from .errors import ConfigError
from .estimators import DECAY_KINDS, MODES

_SECTION = "run"


@dataclass(frozen=True)
class RunConfig:
    # data
    input: str = ""
    variables: tuple[str, ...] = ()
    transforms: tuple[str, ...] = ("level",)
    standardize: bool = True
    # estimator
    mode: str = "no_grouping"
    P: tuple[int, ...] = (1,)
    lam: tuple[float, ...] = (0.1,)
    gamma: tuple[float, ...] = (0.1,)
    eta: tuple[float, ...] = (0.1,)
    alpha: tuple[float, ...] = (1.0, 2.0)
    decay: str = "power"
    segments: tuple[tuple[str, ...], ...] = ()
    targets: tuple[str, ...] = ()
    tolerance: float = 1e-7
    max_sweeps: int = 10000
    which: str = "refit"
    # evaluation
    T0: int = -1
    T1: int = -1
    window_len: int = 120
    horizons: tuple[int, ...] = (1,)
    refit_every: int = 1
    objective: str = "mean"
    refine_factor: int = 3
    refine_rounds: int = 1
    forecaster: str = "var"
    # simulation
    experiment: str = "recovery"
    J: int = 10
    p0: int = 2
    q0: int = 1
    magnitude_low: float = 0.2
    magnitude_high: float = 0.5
    sigma: float = 1.0
    T_list: tuple[int, ...] = (200, 500, 2000)
    trials: int = 100
    a_scale: float = 0.01
    a_exponent: float = -0.6
    b_scale: float = 4.0
    b_exponent: float = -0.4
    assignment: str = "oracle"
    k_list: tuple[int, ...] = (0, 2, 8)
    s: int = 3
    dep_T: int = 500
    dep_P: int = 50
    delta: float = 0.1
    q: float = 0.95
    kappa_budget: int = 100000
    pilot: int = 200
    # run
    out: str = "out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.decay not in DECAY_KINDS:
            raise ConfigError(f"decay must be one of {DECAY_KINDS}, got {self.decay!r}")
        if not self.P or any(p < 1 for p in self.P):
            raise ConfigError("P must be a non-empty list of positive integers")
        for name in ("lam", "gamma", "eta", "alpha"):
            vals = getattr(self, name)
            if not vals or any(not (v >= 0) or math.isinf(v) for v in vals):
                raise ConfigError(f"{name} must be a non-empty list of finite non-negative numbers")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive integers")
        if self.window_len < 2 or self.refit_every < 1:
            raise ConfigError("window_len must be at least 2 and refit_every positive")
        if self.objective not in ("mean", "per_variable", "segment"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.which not in ("refit", "selected"):
            raise ConfigError(f"which must be refit or selected, got {self.which!r}")
        if self.forecaster not in ("var", "benchmark"):
            raise ConfigError(f"forecaster must be var or benchmark, got {self.forecaster!r}")
        if self.experiment not in ("recovery", "dependence"):
            raise ConfigError(f"experiment must be recovery or dependence, got {self.experiment!r}")
        if self.assignment not in ("oracle", "adaptive"):
            raise ConfigError(f"assignment must be oracle or adaptive, got {self.assignment!r}")
        if not (self.a_scale > 0 and self.b_scale > 0):
            raise ConfigError("penalty schedule scales must be positive")
        if not (math.isfinite(self.a_exponent) and math.isfinite(self.b_exponent)):
            raise ConfigError("penalty schedule exponents must be finite")
        if self.trials < 1 or self.threads < 1 or self.max_sweeps < 1:
            raise ConfigError("trials, threads and max_sweeps must be positive")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not 0 <= self.magnitude_low <= self.magnitude_high:
            raise ConfigError("need 0 <= magnitude_low <= magnitude_high")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if not self.T_list or not self.k_list:
            raise ConfigError("T_list and k_list must be non-empty")
        if self.mode == "segmentized" and not self.segments:
            raise ConfigError("segmentized mode needs segments")

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def resolve_input(self, base_dir: str = ".") -> str:
        if not self.input:
            raise ConfigError("input is not set")
        return self.input if os.path.isabs(self.input) else os.path.join(base_dir, self.input)


_HINTS = get_type_hints(RunConfig)


def _parse_value(name: str, raw: str):
    hint = _HINTS[name]
    raw = raw.strip()
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        if hint == tuple[tuple[str, ...], ...]:
            return tuple(tuple(x.strip() for x in seg.split(",") if x.strip())
                         for seg in raw.split(";") if seg.strip())
        item = hint.__args__[0]
        parts = [x.strip() for x in raw.split(",") if x.strip()]
        return tuple(item(x) for x in parts)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return "; ".join(", ".join(seg) for seg in value)
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _line_of(text: str, key: str) -> int:
    for n, line in enumerate(text.splitlines(), 1):
        if line.split("=", 1)[0].strip() == key:
            return n
    return 0


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; lines starting with ``#`` are comments."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=None, delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text, source=source)
    except configparser.Error as exc:
        # the injected section header shifts configparser's line numbers by one
        msg = re.sub(r"\[line\s+(\d+)\]", lambda m: f"[line {int(m.group(1)) - 1}]", str(exc))
        raise ConfigError(f"{source}: {msg}") from None
    known = {f.name for f in fields(RunConfig)}
    kw = {}
    for key, raw in parser.items(_SECTION):
        where = f"{source}:{_line_of(text, key)}"
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            kw[key] = _parse_value(key, raw)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return RunConfig(**kw)


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, source=path)


def format_config(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {_format_value(getattr(cfg, f.name))}\n" for f in fields(cfg))


__all__ = ["RunConfig", "parse_config", "load_config", "format_config"]
