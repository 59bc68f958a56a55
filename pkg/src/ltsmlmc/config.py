"""Flat key = value experiment configuration.

Files hold one ``key = value`` pair per line; ``#`` starts a comment. Lists
are comma separated and the output grid is written ``start:end:n``.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

from .problems import PROBLEMS

EXPERIMENTS = ("smooth1d", "jump1d", "channel2d", "cost-sweep", "graded", "convergence")
MLMC_EXPERIMENTS = ("smooth1d", "jump1d", "channel2d")
SWEEP_AXES = ("r", "p0", "beta")

DEFAULT_EPS = {"smooth1d": (4e-3, 2e-3, 1e-3), "jump1d": (4e-3, 2e-3, 1e-3), "channel2d": (5e-5,)}
DEFAULT_SWEEP_VALUES = {
    "p0": tuple(float(p) for p in range(2, 61)),
    "r": tuple(10.0**e for e in (-6, -5, -4, -3, -2, -1.5, -1, -0.5, 0)),
    "beta": (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0),
}
DEFAULT_M_VALUES = (100, 200, 400, 800, 1600, 3200, 6400, 12800)

# keys that never reach file headers, so outputs do not depend on them
RUNTIME_KEYS = ("workers", "out", "plot")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "smooth1d"
    eps: tuple = ()
    integrator: str = "both"
    seed: int = 0
    # mlmc
    alpha: float = 2.0
    initial_N: int = 16
    initial_L: int = 2
    bias_window: int = 1
    # problem overrides; None means the problem default
    H0: float | None = None
    h_f: float | None = None
    T: float | None = None
    nu: float | None = None
    safety: float | None = None
    max_L: int | None = None
    grid: tuple | None = None
    # cost sweeps and graded meshes
    d: int = 1
    axis: str = "p0"
    values: tuple = ()
    s: float = 2.0
    m_values: tuple = ()
    n_meshes: int = 5
    # runtime
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    out: str = "results"
    plot: bool = False

    def problem_overrides(self) -> dict:
        keys = ("H0", "h_f", "T", "nu", "safety", "max_L", "grid")
        return {k: getattr(self, k) for k in keys if getattr(self, k) is not None}

    def echo(self) -> dict:
        """Keys relevant to this experiment, as written to output headers."""
        return {k: v for k, v in serialize(self).items() if k not in RUNTIME_KEYS}


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("grid must be start:end:n")
    return (float(parts[0]), float(parts[1]), int(parts[2]))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value, key=None):
    if key == "grid":
        return f"{float(value[0])!r}:{float(value[1])!r}:{int(value[2])}"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


_PARSERS = {
    "experiment": str, "eps": _floats, "integrator": str, "seed": int,
    "alpha": float, "initial_N": int, "initial_L": int, "bias_window": int,
    "H0": float, "h_f": float, "T": float, "nu": float, "safety": float, "max_L": int, "grid": _grid,
    "d": int, "axis": str, "values": _floats, "s": float, "m_values": _ints, "n_meshes": int,
    "workers": int, "out": str, "plot": _bool,
}

_KEYS_FOR = {
    "mlmc": ("eps", "integrator", "seed", "alpha", "initial_N", "initial_L", "bias_window",
             "H0", "h_f", "T", "nu", "safety", "max_L", "grid"),
    "cost-sweep": ("d", "axis", "values"),
    "graded": ("d", "s", "m_values"),
    "convergence": ("n_meshes", "nu", "safety"),
}


def _group(experiment):
    return "mlmc" if experiment in MLMC_EXPERIMENTS else experiment


def default_config(experiment="smooth1d", **runtime) -> ExperimentConfig:
    """Defaults with every experiment-specific value spelled out."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    kw = {"experiment": experiment}
    if experiment in MLMC_EXPERIMENTS:
        prob = PROBLEMS[experiment]()
        kw.update(eps=DEFAULT_EPS[experiment], H0=prob.H0, h_f=prob.h_f, T=prob.T, nu=prob.nu,
                  safety=prob.safety, max_L=prob.max_L, grid=tuple(prob.grid))
    elif experiment == "cost-sweep":
        kw.update(values=DEFAULT_SWEEP_VALUES["p0"])
    elif experiment == "graded":
        kw.update(d=2, m_values=DEFAULT_M_VALUES)
    else:
        kw.update(nu=0.01, safety=0.9)
    kw.update(runtime)
    return ExperimentConfig(**kw)


def serialize(cfg: ExperimentConfig) -> dict:
    keys = ("experiment",) + _KEYS_FOR[_group(cfg.experiment)] + RUNTIME_KEYS
    return {k: _fmt(getattr(cfg, k), k) for k in keys if getattr(cfg, k) is not None}


def emit_defaults(experiment="smooth1d") -> str:
    cfg = default_config(experiment)
    lines = [f"# defaults for {experiment}"]
    lines += [f"{k} = {v}" for k, v in serialize(cfg).items()]
    return "\n".join(lines) + "\n"


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    need(cfg.experiment in EXPERIMENTS, f"unknown experiment {cfg.experiment!r}")
    need(cfg.integrator in ("lf", "lts", "both"), "integrator must be lf, lts or both")
    need(0 <= cfg.seed < 2**64, "seed must be an unsigned 64-bit integer")
    need(cfg.workers >= 1, "workers must be at least 1")
    if cfg.experiment in MLMC_EXPERIMENTS:
        need(len(cfg.eps) > 0 and all(e > 0 for e in cfg.eps), "eps must be a non-empty list of positive numbers")
        need(cfg.alpha >= 1, "alpha must be at least 1")
        need(cfg.initial_N >= 2, "initial_N must be at least 2")
        need(cfg.initial_L >= 0, "initial_L must be non-negative")
        need(cfg.bias_window in (1, 2), "bias_window must be 1 or 2")
    if cfg.nu is not None:
        need(0 <= cfg.nu <= 1, "nu must lie in [0, 1]")
    if cfg.safety is not None:
        need(0 < cfg.safety <= 1, "safety must lie in (0, 1]")
    for k in ("H0", "h_f", "T"):
        v = getattr(cfg, k)
        need(v is None or v > 0, f"{k} must be positive")
    if cfg.H0 is not None and cfg.h_f is not None:
        need(cfg.h_f <= cfg.H0, "h_f must not exceed H0")
    if cfg.max_L is not None:
        need(cfg.max_L >= 0, "max_L must be non-negative")
    if cfg.grid is not None:
        need(cfg.grid[0] < cfg.grid[1] and cfg.grid[2] >= 2, "grid needs start < end and at least 2 points")
    if cfg.experiment == "cost-sweep":
        need(cfg.d in (1, 2, 3), "d must be 1, 2 or 3")
        need(cfg.axis in SWEEP_AXES, f"axis must be one of {', '.join(SWEEP_AXES)}")
        need(len(cfg.values) > 0, "values must not be empty")
    if cfg.experiment == "graded":
        need(cfg.d in (1, 2, 3), "d must be 1, 2 or 3")
        need(cfg.s >= 1, "s must be at least 1")
        need(len(cfg.m_values) > 0 and min(cfg.m_values) >= 2, "m_values must be integers >= 2")
    if cfg.experiment == "convergence":
        need(cfg.n_meshes >= 2, "n_meshes must be at least 2")
    return cfg


def parse_text(text: str, experiment: str | None = None, **overrides) -> ExperimentConfig:
    """Parse config text; ``experiment`` and ``overrides`` (non-None) win over the file."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = dict(cp["config"])
    unknown = sorted(set(raw) - set(_PARSERS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    experiment = experiment or raw.get("experiment", "smooth1d")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    values = {}
    for k, v in raw.items():
        try:
            values[k] = _PARSERS[k](v)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k}: {exc}") from None
    values["experiment"] = experiment
    values.update({k: v for k, v in overrides.items() if v is not None})
    if experiment == "cost-sweep" and "values" not in values:
        values["values"] = DEFAULT_SWEEP_VALUES.get(values.get("axis", "p0"), ())
    try:
        cfg = dataclasses.replace(default_config(experiment), **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return validate(cfg)


def parse_config(path, experiment: str | None = None, **overrides) -> ExperimentConfig:
    if path is None:
        return parse_text("", experiment, **overrides)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), experiment, **overrides)


__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "ExperimentConfig",
    "default_config",
    "emit_defaults",
    "parse_config",
    "parse_text",
    "serialize",
    "validate",
]
