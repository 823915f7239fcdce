"""Run configuration: flat ``key = value`` documents with validated defaults.

Defaults reproduce the published parameter table (standoffs, sharpness,
gains, speed limit, minimum cluster size); the remaining keys cover the
nominal controller, sensor and simulation plumbing.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path

from .barrier import BarrierSpec, GammaSchedule, SHAPING_FUNCTIONS, shaping_by_name
from .filter import FilterParams
from .nominal import ApfParams

# keys under this prefix are written by the simulator next to the config echo
METRIC_PREFIX = "metric."


class ConfigError(ValueError):
    """Invalid configuration document or value."""


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "corridor"
    ticks: int = 1200
    dt: float = 0.1
    seed: int = 0
    filter_enabled: bool = True
    out_dir: str = "runs"
    # barriers
    d_safe: float = 0.35
    d_stop: float = 0.35
    a1: float = 2.0
    a2: float = 2.0
    gamma1: float = 1.5
    gamma2_max: float = 1.0
    gamma2_min: float = 0.2
    shaping: str = "tanh"
    # filter
    penalty_p: float = 50.0
    v_max: float = 0.20
    parallel_tol: float = 1e-6
    degenerate_tol: float = 1e-9
    bisection_iters: int = 20
    intervention_tol: float = 1e-6
    # frontier extraction
    n_min: int = 25
    # nominal controller
    k_att: float = 0.8
    k_rep: float = 0.05
    d0: float = 1.0
    v_nom_cap: float = 0.20
    goal_reached_radius: float = 0.3
    # sensor and robot
    sensor_range: float = 3.0
    ray_count: int = 180
    fov_deg: float = 360.0
    robot_radius: float = 0.22

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            try:
                object.__setattr__(self, f.name, _coerce(f.type, value))
            except (TypeError, ValueError):
                raise ConfigError(f"{f.name}: expected {f.type}, got {value!r}") from None
        self._validate()

    def _validate(self):
        positive = ("dt", "a1", "a2", "gamma1", "gamma2_max", "gamma2_min", "penalty_p", "v_max",
                    "parallel_tol", "degenerate_tol", "k_att", "k_rep", "d0", "v_nom_cap",
                    "goal_reached_radius", "sensor_range", "robot_radius")
        for name in positive:
            value = getattr(self, name)
            if not (value > 0) or not math.isfinite(value):
                raise ConfigError(f"{name} must be a finite value > 0, got {value!r}")
        for name in ("d_safe", "d_stop", "intervention_tol"):
            if not (getattr(self, name) >= 0):
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.ticks < 1:
            raise ConfigError(f"ticks must be >= 1, got {self.ticks}")
        if self.bisection_iters < 1:
            raise ConfigError(f"bisection_iters must be >= 1, got {self.bisection_iters}")
        if self.n_min < 1:
            raise ConfigError(f"n_min must be >= 1, got {self.n_min}")
        if self.ray_count < 8:
            raise ConfigError(f"ray_count must be >= 8, got {self.ray_count}")
        if not (0 < self.fov_deg <= 360):
            raise ConfigError(f"fov_deg must lie in (0, 360], got {self.fov_deg}")
        if self.gamma2_min > self.gamma2_max:
            raise ConfigError(f"gamma2_min ({self.gamma2_min}) must not exceed gamma2_max ({self.gamma2_max})")
        if self.shaping not in SHAPING_FUNCTIONS:
            raise ConfigError(f"shaping must be one of {sorted(SHAPING_FUNCTIONS)}, got {self.shaping!r}")
        if not self.scenario:
            raise ConfigError("scenario must not be empty")

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)

    # views used by the other modules

    def obstacle_spec(self) -> BarrierSpec:
        return BarrierSpec(self.a1, self.d_safe, self.gamma1, shaping_by_name(self.shaping))

    def frontier_spec(self) -> BarrierSpec:
        return BarrierSpec(self.a2, self.d_stop, self.gamma2_max, shaping_by_name(self.shaping))

    def gamma_schedule(self) -> GammaSchedule:
        return GammaSchedule(self.gamma2_min, self.gamma2_max)

    def filter_params(self) -> FilterParams:
        return FilterParams(self.penalty_p, self.v_max, self.parallel_tol, self.degenerate_tol,
                            self.bisection_iters, self.intervention_tol)

    def apf_params(self) -> ApfParams:
        return ApfParams(self.k_att, self.k_rep, self.d0, self.v_nom_cap)

    def echo(self) -> str:
        """Config as a loadable document (every key, in declaration order)."""
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))


def _coerce(type_name: str, value):
    if type_name == "bool":
        if isinstance(value, bool):
            return value
        if isinstance(value, str):
            low = value.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
        raise ValueError(value)
    if type_name == "int":
        if isinstance(value, bool):
            raise TypeError(value)
        if isinstance(value, str):
            return int(value.strip())
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return int(value)
    if type_name == "float":
        if isinstance(value, bool):
            raise TypeError(value)
        return float(value)
    if type_name == "str":
        if not isinstance(value, str):
            raise TypeError(value)
        return value.strip()
    raise TypeError(type_name)


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse a flat key-value document; keys not given keep ``base`` (default) values."""
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith(METRIC_PREFIX):
            continue
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    base = base or RunConfig()
    return dataclasses.replace(base, **values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
