"""Experiment configuration: a flat ``key = value`` text format.

One assignment per line, ``#`` starts a comment, keys may carry dotted
section names (``timing.T``), lists are bracketed and comma separated::

    name = sm-xi
    scheme = SM-MH
    q = 1
    timing.T = 400e-6
    sweep.var = xi
    sweep.grid = [5, 10, 15, 20]
    series.protocol = [FD, HD, FD-A-SI, baseline]

Every ``series.<key>`` list names a scalar key; the experiment is run for
each combination of the listed values (one result table per combination).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..model import (DEFAULT_DIFFUSION, DEFAULT_LENGTH, DEFAULT_P1, DEFAULT_RADIUS, PROTOCOLS,
                     parse_scheme)

SWEEP_VARS = ("xi", "na", "q", "T")
ENGINES = ("analytical", "sim", "both")
XI_MODES = ("fixed", "average", "search")
BASELINE = "baseline"


def _as_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "yes", "1"):
        return True
    if isinstance(v, str) and v.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _as_int(v):
    if isinstance(v, bool):
        raise ValueError(f"not an integer: {v!r}")
    f = float(v)
    if f != int(f):
        raise ValueError(f"not an integer: {v!r}")
    return int(f)


def _as_engine(v):
    v = str(v)
    return "sim" if v == "simulation" else v


# key -> (spec attribute, converter, default); a default of ``None`` marks a required key
SCHEMA = {
    "name": ("name", str, "experiment"),
    "scheme": ("scheme", lambda v: parse_scheme(v).value, None),
    "protocol": ("protocol", str, "FD"),
    "q": ("q", _as_int, None),
    "topology.x_d": ("x_d", float, 1e-6),
    "topology.radius": ("radius", float, DEFAULT_RADIUS),
    "topology.diffusion": ("diffusion", float, DEFAULT_DIFFUSION),
    "timing.T": ("T", float, 200e-6),
    "timing.M": ("M", _as_int, 10),
    "timing.t0": ("t0", float, 20e-6),
    "source.p1": ("p1", float, DEFAULT_P1),
    "source.length": ("length", _as_int, DEFAULT_LENGTH),
    "budget.n_total": ("n_total", float, 2e4),
    "budget.split": ("split_budget", _as_bool, True),
    "detection.xi": ("xi", float, 10.0),
    "detection.xi_mode": ("xi_mode", str, "fixed"),
    "detection.xi_search": ("xi_search", lambda v: tuple(_as_int(x) for x in v), (1, 60)),
    "detection.alignment": ("alignment", str, "emission"),
    "sweep.var": ("sweep_var", str, None),
    "sweep.grid": ("grid", lambda v: tuple(float(x) for x in v), None),
    "engine": ("engine", _as_engine, "both"),
    "sim.trials": ("trials", _as_int, 1000),
    "sim.engine": ("sim_engine", str, "radial"),
    "analytical.realizations": ("realizations", _as_int, 200),
    "seed": ("seed", _as_int, 0),
    "workers": ("workers", _as_int, 1),
    "output.dir": ("out", str, "results"),
    "artifact.version": ("version", str, ""),
}
LIST_KEYS = ("sweep.grid", "detection.xi_search")
_ATTR = {attr: key for key, (attr, _, _) in SCHEMA.items()}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce a sweep.

    ``series`` maps schema keys to value lists; each combination is a
    separate curve.  A protocol value ``baseline`` means the direct link
    (Q = 0) with the same total budget.
    """

    scheme: str
    q: int
    sweep_var: str
    grid: tuple
    name: str = "experiment"
    protocol: str = "FD"
    x_d: float = 1e-6
    radius: float = DEFAULT_RADIUS
    diffusion: float = DEFAULT_DIFFUSION
    T: float = 200e-6
    M: int = 10
    t0: float = 20e-6
    p1: float = DEFAULT_P1
    length: int = DEFAULT_LENGTH
    n_total: float = 2e4
    split_budget: bool = True
    xi: float = 10.0
    xi_mode: str = "fixed"
    xi_search: tuple = (1, 60)
    alignment: str = "emission"
    engine: str = "both"
    trials: int = 1000
    sim_engine: str = "radial"
    realizations: int = 200
    seed: int = 0
    workers: int = 1
    out: str = "results"
    version: str = ""
    series: tuple = field(default=())

    def __post_init__(self):
        validate(self)

    def variants(self) -> list[tuple[str, "ExperimentSpec"]]:
        """``(label, spec)`` per series combination, in declaration order."""
        if not self.series:
            return [("", replace(self, series=()))]
        keys = [k for k, _ in self.series]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.series)):
            changes = {SCHEMA[k][0]: v for k, v in zip(keys, combo)}
            label = "_".join(f"{k.split('.')[-1]}-{_fmt(v)}" for k, v in zip(keys, combo))
            out.append((label, replace(self, series=(), **changes)))
        return out


def _check(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(spec: ExperimentSpec) -> None:
    _check(spec.sweep_var in SWEEP_VARS, "sweep.var", f"must be one of {SWEEP_VARS}")
    _check(len(spec.grid) > 0, "sweep.grid", "grid must not be empty")
    _check(spec.engine in ENGINES, "engine", f"must be one of {ENGINES}")
    _check(spec.sim_engine in ("radial", "particle"), "sim.engine", "must be radial or particle")
    _check(spec.xi_mode in XI_MODES, "detection.xi_mode", f"must be one of {XI_MODES}")
    _check(spec.alignment in ("emission", "literal"), "detection.alignment",
           "must be emission or literal")
    _check(spec.q >= 0, "q", "must be >= 0")
    _check(spec.x_d > 0, "topology.x_d", "must be positive")
    _check(spec.radius > 0, "topology.radius", "must be positive")
    _check(spec.diffusion > 0, "topology.diffusion", "must be positive")
    _check(spec.T > 0, "timing.T", "must be positive")
    _check(spec.M >= 1, "timing.M", "must be >= 1")
    _check(spec.t0 > 0 and spec.M * spec.t0 <= spec.T * (1 + 1e-12), "timing.t0",
           "need 0 < M*t0 <= T")
    _check(0.0 < spec.p1 < 1.0, "source.p1", "must lie in (0, 1)")
    _check(spec.length >= 1, "source.length", "must be >= 1")
    _check(spec.n_total > 0, "budget.n_total", "must be positive")
    _check(spec.xi >= 1, "detection.xi", "must be >= 1")
    _check(len(spec.xi_search) == 2 and 1 <= spec.xi_search[0] <= spec.xi_search[1],
           "detection.xi_search", "must be [lo, hi] with 1 <= lo <= hi")
    _check(spec.trials >= 1, "sim.trials", "must be >= 1")
    _check(spec.realizations >= 1, "analytical.realizations", "must be >= 1")
    _check(spec.workers >= 1, "workers", "must be >= 1")
    if spec.sweep_var == "xi":
        _check(min(spec.grid) >= 1, "sweep.grid", "thresholds must be >= 1")
    if spec.sweep_var == "q":
        _check(all(g >= 0 and g == int(g) for g in spec.grid), "sweep.grid",
               "relay counts must be non-negative integers")
    if spec.sweep_var in ("na", "T"):
        _check(min(spec.grid) > 0, "sweep.grid", "values must be positive")
    for key, vals in spec.series:
        _check(key in SCHEMA and key not in LIST_KEYS and not key.startswith("sweep."),
               f"series.{key}", "not a scalar key")
        _check(len(vals) > 0, f"series.{key}", "list must not be empty")
    protocols = [v for k, vals in spec.series if k == "protocol" for v in vals] or [spec.protocol]
    allowed = PROTOCOLS[parse_scheme(spec.scheme)] + (BASELINE,)
    for p in protocols:
        _check(p in allowed, "protocol", f"{p!r} is not one of {allowed} for {spec.scheme}")


# ---------------------------------------------------------------- text format

def _scalar(tok: str):
    tok = tok.strip()
    for conv in (int, float):
        try:
            return conv(tok)
        except ValueError:
            pass
    if tok.lower() in ("true", "false"):
        return tok.lower() == "true"
    if len(tok) >= 2 and tok[0] == tok[-1] and tok[0] in "\"'":
        return tok[1:-1]
    return tok


def _value(raw: str):
    raw = raw.strip()
    if raw.startswith("["):
        if not raw.endswith("]"):
            raise ValueError("unterminated list")
        body = raw[1:-1].strip()
        return [_scalar(t) for t in body.split(",")] if body else []
    return _scalar(raw)


def parse_text(text: str) -> dict:
    """``{key: value}`` from config text; later assignments override earlier ones."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {n}: empty key")
        try:
            out[key] = _value(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


def spec_from_dict(values: dict) -> ExperimentSpec:
    kwargs = {}
    series = []
    for key, val in values.items():
        if key.startswith("series."):
            sub = key[len("series."):]
            if sub not in SCHEMA:
                raise ConfigError(f"{key}: unknown key {sub!r}")
            vals = val if isinstance(val, list) else [val]
            try:
                series.append((sub, tuple(SCHEMA[sub][1](v) for v in vals)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
            continue
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown key")
        attr, conv, _ = SCHEMA[key]
        if isinstance(val, list) != (key in LIST_KEYS):
            raise ConfigError(f"{key}: expected {'a list' if key in LIST_KEYS else 'a scalar'}")
        try:
            kwargs[attr] = conv(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    for key, (attr, _, default) in SCHEMA.items():
        if default is None and attr not in kwargs:
            raise ConfigError(f"{key}: missing required key")
    return ExperimentSpec(series=tuple(series), **kwargs)


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return spec_from_dict(parse_text(path.read_text(encoding="utf-8")))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    return str(v)


def to_text(spec: ExperimentSpec) -> str:
    """Full config text with every key written out; ``load_config`` reads it back."""
    lines = []
    for key, (attr, _, _) in SCHEMA.items():
        v = getattr(spec, attr)
        if key in LIST_KEYS:
            lines.append(f"{key} = [{', '.join(_fmt(x) for x in v)}]")
        else:
            lines.append(f"{key} = {_fmt(v)}")
    for key, vals in spec.series:
        lines.append(f"series.{key} = [{', '.join(_fmt(x) for x in vals)}]")
    return "\n".join(lines) + "\n"


def spec_fields() -> list[str]:
    return [f.name for f in fields(ExperimentSpec)]
