"""Dual control-barrier-function safety filter for frontier exploration.

The filter keeps a single-integrator robot a standoff away from mapped
obstacles and from unexplored space at the same time, using signed distance
fields of an occupancy grid and a closed-form two-constraint projection.
"""

from ._kernels import BACKEND
from .barrier import (ERF, RATIONAL, TANH, BarrierSpec, GammaSchedule, HalfspaceConstraint,
                      ShapingFunction, adaptive_gamma, barrier_value, build_constraint,
                      check_admissibility, shaping_by_name)
from .config import ConfigError, RunConfig, load_config, parse_config
from .filter import (FilterCase, FilterParams, FilterResult, apply_filter, project_dual,
                     project_single, solve_soft, speed_ceiling, verify_kkt)
from .grid import (CellState, OccupancyGrid, SdfKind, SignedDistanceField, compute_frontier_sdf,
                   compute_obstacle_sdf, extract_frontier_clusters, parse_grid_text, sample,
                   uncertainty_density)
from .sim import EpisodeMetrics, TickTrace, compute_metrics, load_scenario, run_episode

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ERF", "RATIONAL", "TANH", "BarrierSpec", "GammaSchedule", "HalfspaceConstraint",
    "ShapingFunction", "adaptive_gamma", "barrier_value", "build_constraint", "check_admissibility",
    "shaping_by_name", "ConfigError", "RunConfig", "load_config", "parse_config", "FilterCase",
    "FilterParams", "FilterResult", "apply_filter", "project_dual", "project_single", "solve_soft",
    "speed_ceiling", "verify_kkt", "CellState", "OccupancyGrid", "SdfKind", "SignedDistanceField",
    "compute_frontier_sdf", "compute_obstacle_sdf", "extract_frontier_clusters", "parse_grid_text",
    "sample", "uncertainty_density", "EpisodeMetrics", "TickTrace", "compute_metrics",
    "load_scenario", "run_episode", "__version__",
]
