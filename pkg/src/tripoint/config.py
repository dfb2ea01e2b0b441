"""Run configuration: flat ``key = value`` text with list literals.

Example::

    # test pair
    p.mean = 0.0
    p.cos  = [0.3]
    q.cos  = [0.0, 0.1]
    q.sin  = [0.2]
    N      = 10
    t_grid = [0.1, 0.5, 0.9]
    tol.char_rtol = 1e-13

Values are Python literals (numbers, strings, lists).  Keys are checked
against a fixed vocabulary so typos fail loudly with the offending line.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientPair, PeriodicCoefficient
from .errors import ConfigError
from .propagator import D_RTOL

TOL_BOUNDS = (1e-14, 1e-3)

DEFAULT_TOLERANCES = {
    "char_rtol": D_RTOL,        # adaptive integration of the characteristic function
    "merge_tol": 1e-6,          # relative distance below which two zeros are one cluster
    "picard_tol": 1e-12,        # successive Picard iterates
    "refine_tol": 1e-10,        # Birkhoff grid refinement
    "conj_tol": 1e-6,           # conjugate symmetry of the delta pair
    "endpoint_tol": 1e-8,       # delta flow endpoints against +-nu^3
    "imag_tol": 1e-8,           # imaginary part of the trace partial sums
    "closed_form_tol": 1e-8,    # unperturbed eigenvalues against the closed form
}

_SCALAR_KEYS = {
    "N": int, "n": int, "partner": int, "m": None, "gamma": float, "t_points": int,
    "t_start": float, "t_end": float, "trace_floor": float, "recover": str, "n0": int,
    "cross_check_upto": int,
}
_LIST_KEYS = {"t_grid", "n_range", "z_values", "thetas", "m_values", "orders", "x_values"}
_COEFF_KEYS = {f"{c}.{part}" for c in ("p", "q") for part in ("mean", "cos", "sin")}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    lines: dict = field(default_factory=dict)      # key -> source line number

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str):
        if key not in self.values:
            raise ConfigError(f"missing required field '{key}'")
        return self.values[key]

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    # derived objects ------------------------------------------------------

    def _coefficient(self, name: str) -> PeriodicCoefficient:
        keys = [k for k in self.values if k.startswith(name + ".")]
        if not keys:
            raise ConfigError(f"missing required field '{name}' (give {name}.mean, {name}.cos or {name}.sin)")
        mean = self.values.get(f"{name}.mean", 0.0)
        cos = self.values.get(f"{name}.cos", [])
        sin = self.values.get(f"{name}.sin", [])
        try:
            return PeriodicCoefficient(float(mean), tuple(float(v) for v in cos),
                                       tuple(float(v) for v in sin))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field '{name}': {exc}") from exc

    def pair(self) -> CoefficientPair:
        return CoefficientPair(self._coefficient("p"), self._coefficient("q"))

    def t_grid(self, default_points: int = 64) -> np.ndarray:
        if self.has("t_grid"):
            g = np.asarray(self.values["t_grid"], dtype=float)
            if g.ndim != 1 or g.size == 0 or np.any(np.diff(g) <= 0):
                raise ConfigError(f"field 't_grid' (line {self.lines.get('t_grid')}) must be increasing")
            return g
        n = int(self.get("t_points", default_points))
        if n < 2:
            raise ConfigError("field 't_points' must be at least 2")
        return np.linspace(float(self.get("t_start", 0.0)), float(self.get("t_end", 1.0)), n)


def check_tolerance(name: str, value) -> float:
    if name not in DEFAULT_TOLERANCES:
        raise ConfigError(f"unknown tolerance '{name}' (known: {', '.join(sorted(DEFAULT_TOLERANCES))})")
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"tolerance '{name}' is not a number: {value!r}") from exc
    lo, hi = TOL_BOUNDS
    if not (lo <= v <= hi):
        raise ConfigError(f"tolerance '{name}' = {v:g} outside [{lo:g}, {hi:g}]")
    return v


def _literal(text: str, lineno: int, key: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"line {lineno}: cannot parse value of '{key}': {text!r}") from exc


def _check_type(key: str, value, lineno: int):
    if key in _COEFF_KEYS:
        if key.endswith(".mean"):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"line {lineno}: field '{key}' must be a number")
        elif not isinstance(value, (list, tuple)) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"line {lineno}: field '{key}' must be a list of numbers")
        return value
    if key in _LIST_KEYS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"line {lineno}: field '{key}' must be a list")
        return list(value)
    kind = _SCALAR_KEYS[key]
    if kind is None:
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(f"line {lineno}: field '{key}' must be a quoted string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"line {lineno}: field '{key}' must be a number")
    if kind is int and float(value) != int(value):
        raise ConfigError(f"line {lineno}: field '{key}' must be an integer")
    return kind(value)


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in cfg.lines:
            raise ConfigError(f"line {lineno}: field '{key}' repeats line {cfg.lines[key]}")
        value = _literal(val, lineno, key)
        if key.startswith("tol."):
            cfg.tolerances[key[4:]] = check_tolerance(key[4:], value)
        elif key in _COEFF_KEYS or key in _LIST_KEYS or key in _SCALAR_KEYS:
            cfg.values[key] = _check_type(key, value, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown field '{key}'")
        cfg.lines[key] = lineno
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"tolerance override must look like name=value, got {item!r}")
        name, value = (s.strip() for s in item.split("=", 1))
        cfg.tolerances[name] = check_tolerance(name, value)
    return cfg
