"""Nominal controller: nearest-frontier goal plus an attractive/repulsive potential field."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import FrontierClusterSet, SdfSample


@dataclass(frozen=True)
class ApfParams:
    k_att: float = 0.8
    k_rep: float = 0.05
    d0: float = 1.0
    v_nom_cap: float = 0.20

    def __post_init__(self):
        for name in ("k_att", "k_rep", "d0", "v_nom_cap"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    def check_standoff(self, d_safe: float) -> None:
        if self.d0 <= d_safe:
            warnings.warn(f"APF influence radius d0={self.d0} does not exceed d_safe={d_safe}",
                          stacklevel=2)


@dataclass(frozen=True)
class Goal:
    position: np.ndarray
    source_cluster_size: int
    cluster_index: int = -1


def select_goal(clusters: FrontierClusterSet, pos) -> Goal | None:
    """Nearest cluster centroid; ties go to the larger cluster, then the earlier one."""
    best = None
    best_key = None
    px, py = float(pos[0]), float(pos[1])
    for i, c in enumerate(clusters):
        d = math.hypot(c.centroid[0] - px, c.centroid[1] - py)
        key = (d, -c.size, i)
        if best_key is None or key < best_key:
            best, best_key = i, key
    if best is None:
        return None
    c = clusters[best]
    return Goal(np.array(c.centroid, dtype=np.float64), c.size, best)


def _saturate(vx: float, vy: float, cap: float) -> tuple[float, float]:
    n = math.hypot(vx, vy)
    if n > cap:
        return vx * cap / n, vy * cap / n
    return vx, vy


def apf_velocity(pos, goal: Goal | None, obs: SdfSample, params: ApfParams = ApfParams()) -> np.ndarray:
    """Attraction toward the goal plus Khatib repulsion along the obstacle SDF gradient."""
    ax = ay = 0.0
    if goal is not None:
        ax, ay = _saturate(params.k_att * (goal.position[0] - pos[0]),
                           params.k_att * (goal.position[1] - pos[1]), params.v_nom_cap)
    rx = ry = 0.0
    phi = obs.value
    if not obs.degenerate and phi < params.d0:
        if phi <= 0.0:
            mag = params.v_nom_cap
        else:
            mag = params.k_rep * (1.0 / phi - 1.0 / params.d0) / (phi * phi)
        rx, ry = mag * obs.gradient[0], mag * obs.gradient[1]
    return np.array(_saturate(ax + rx, ay + ry, params.v_nom_cap))
