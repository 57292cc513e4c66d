"""Run configuration files: flat ``[section] key = value`` text.

Values are JSON fragments (numbers, booleans, bracketed lists); anything
that does not parse as JSON is kept as a bare string, so ``alpha = auto``
and plain file paths work unquoted.  Parsing, serialization and parsing
again is the identity on every field.
"""

from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .boundary import (
    BoxDomain,
    window_crossfeed_law,
    window_crossfeed_reflect_law,
    zero_inflow_law,
)
from .errors import ConfigError
from .grid import Grid
from .model import DEFAULT_STEADY_TOL, DiscreteVelocityModel, SteadyState, build_coplanar

LAW_NAMES = ("zero", "crossfeed", "crossfeed_reflect")
INITIAL_KINDS = ("constant", "sine")


@dataclass
class RunConfig:
    # [model]
    preset: str = None
    speed: float = None
    rate: float = None
    velocities: list = None
    collisions: list = None
    # [steady_state]
    steady_values: list = None
    steady_tolerance: float = DEFAULT_STEADY_TOL
    # [domain]
    lower: list = None
    upper: list = None
    cells: list = None
    # [time]
    dt: float = None
    t_end: float = None
    record_every: int = 1
    # [control]
    law: str = "zero"
    k1: float = None
    k2: float = None
    k3: float = None
    window: list = None
    # [lyapunov]
    alpha: object = "auto"
    margin: float = 0.1
    # [output]
    csv: str = None
    report: str = None
    figures: bool = True
    snapshot: str = None
    fit_window: list = None
    # [initial]
    initial_kind: str = "constant"
    initial_values: list = None
    amplitude: list = None
    modes: list = None


# section -> {config key: dataclass attribute}
_SCHEMA = {
    "model": {
        "preset": "preset",
        "speed": "speed",
        "rate": "rate",
        "velocities": "velocities",
        "collisions": "collisions",
    },
    "steady_state": {"values": "steady_values", "tolerance": "steady_tolerance"},
    "domain": {"lower": "lower", "upper": "upper", "cells": "cells"},
    "time": {"dt": "dt", "t_end": "t_end", "record_every": "record_every"},
    "control": {"law": "law", "k1": "k1", "k2": "k2", "k3": "k3", "window": "window"},
    "lyapunov": {"alpha": "alpha", "margin": "margin"},
    "output": {
        "csv": "csv",
        "report": "report",
        "figures": "figures",
        "snapshot": "snapshot",
        "fit_window": "fit_window",
    },
    "initial": {
        "kind": "initial_kind",
        "values": "initial_values",
        "amplitude": "amplitude",
        "modes": "modes",
    },
}

def _parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _format_value(value):
    if isinstance(value, str):
        return value
    return json.dumps(value)


def parse_config(text):
    """Parse configuration text into a ``RunConfig``."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"could not parse config: {exc}") from exc
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        keys = _SCHEMA[section]
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            setattr(cfg, keys[key], _parse_value(raw))
    return cfg


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_config(handle.read())
    except OSError as exc:
        raise ConfigError(f"could not read config file {path}: {exc}") from exc


def serialize_config(cfg):
    """Render a ``RunConfig`` back to config text (defaults omitted)."""
    out = io.StringIO()
    first = True
    for section, keys in _SCHEMA.items():
        lines = []
        for key, attr in keys.items():
            value = getattr(cfg, attr)
            if value is None:
                continue
            lines.append(f"{key} = {_format_value(value)}")
        if not lines:
            continue
        if not first:
            out.write("\n")
        out.write(f"[{section}]\n")
        for line in lines:
            out.write(line + "\n")
        first = False
    return out.getvalue()


def _require(cfg, attr, section, key):
    value = getattr(cfg, attr)
    if value is None:
        raise ConfigError(f"missing required key '{key}' in section [{section}]")
    return value


def build_model(cfg):
    if cfg.preset is not None:
        if cfg.preset != "coplanar":
            raise ConfigError(f"unknown model preset '{cfg.preset}'")
        speed = cfg.speed if cfg.speed is not None else 1.0
        rate = cfg.rate if cfg.rate is not None else 0.1
        return build_coplanar(speed, rate)
    velocities = _require(cfg, "velocities", "model", "velocities")
    collisions = []
    for row in cfg.collisions or []:
        if len(row) != 5:
            raise ConfigError(f"collision rows must be [i, j, k, l, rate], got {row}")
        i, j, k, l = (int(x) - 1 for x in row[:4])  # config uses 1-based species
        collisions.append((i, j, k, l, float(row[4])))
    return DiscreteVelocityModel(velocities, collisions)


def build_steady_state(cfg, model):
    values = _require(cfg, "steady_values", "steady_state", "values")
    return SteadyState(model, values, tol=cfg.steady_tolerance)


def build_domain(cfg, model):
    if cfg.lower is None and cfg.upper is None:
        return BoxDomain.unit(model.dim)
    lower = _require(cfg, "lower", "domain", "lower")
    upper = _require(cfg, "upper", "domain", "upper")
    return BoxDomain(lower, upper)


def build_grid(cfg, domain):
    cells = _require(cfg, "cells", "domain", "cells")
    return Grid.from_domain(domain, cells)


def build_law(cfg):
    name = cfg.law
    if name == "zero":
        return zero_inflow_law()
    window = tuple(cfg.window) if cfg.window is not None else (1.0 / 3.0, 2.0 / 3.0)
    if name == "crossfeed":
        k1 = _require(cfg, "k1", "control", "k1")
        return window_crossfeed_law(k1, window)
    if name == "crossfeed_reflect":
        k2 = _require(cfg, "k2", "control", "k2")
        k3 = _require(cfg, "k3", "control", "k3")
        return window_crossfeed_reflect_law(k2, k3, window)
    raise ConfigError(f"unknown control law '{name}'; valid names: {', '.join(LAW_NAMES)}")


def law_summary(cfg):
    gains = {k: getattr(cfg, k) for k in ("k1", "k2", "k3") if getattr(cfg, k) is not None}
    summary = {"law": cfg.law, **gains}
    if cfg.window is not None:
        summary["window"] = list(cfg.window)
    return summary


def build_initial_field(cfg, model, grid):
    """Initial deviation field: constant vector or separable sine bump."""
    n = model.n_species
    shape = (n,) + grid.nodes_per_axis
    kind = cfg.initial_kind
    if kind == "constant":
        values = _require(cfg, "initial_values", "initial", "values")
        arr = np.asarray(values, dtype=float)
        if arr.shape != (n,):
            raise ConfigError(f"initial values must list {n} components")
        field = np.empty(shape)
        field[:] = arr.reshape((n,) + (1,) * grid.dim)
        return field
    if kind == "sine":
        amplitude = np.asarray(_require(cfg, "amplitude", "initial", "amplitude"), dtype=float)
        if amplitude.shape != (n,):
            raise ConfigError(f"initial amplitude must list {n} components")
        modes = cfg.modes if cfg.modes is not None else [1] * grid.dim
        if len(modes) != grid.dim:
            raise ConfigError(f"initial modes must list {grid.dim} integers")
        bump = np.ones(())
        for m, nodes, lo, hi in zip(modes, grid.axis_nodes, grid.lower, grid.upper):
            bump = np.multiply.outer(bump, np.sin(math.pi * int(m) * (nodes - lo) / (hi - lo)))
        return amplitude.reshape((n,) + (1,) * grid.dim) * bump[None]
    raise ConfigError(f"unknown initial kind '{kind}'; valid kinds: {', '.join(INITIAL_KINDS)}")


def default_fit_window(cfg):
    if cfg.fit_window is not None:
        if len(cfg.fit_window) != 2:
            raise ConfigError("fit_window must be [lo, hi]")
        return float(cfg.fit_window[0]), float(cfg.fit_window[1])
    t_end = _require(cfg, "t_end", "time", "t_end")
    return t_end / 5.0, t_end
