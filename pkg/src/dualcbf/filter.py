"""Closed-form dual-halfspace safety filter.

The filter projects a desired velocity onto ``{u : g1.u >= b1, g2.u >= b2}``
by enumerating the KKT active sets, falls back to a shared-slack soft QP when
the normals are parallel and the intersection is empty, and finally clips the
speed to ``v_max``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .barrier import (BarrierSpec, GammaSchedule, HalfspaceConstraint, TANH, adaptive_gamma,
                      build_constraint)
from .grid import SdfSample


class FilterCase(enum.Enum):
    NOMINAL = "Nominal"
    SINGLE_OBSTACLE = "SingleObstacle"
    SINGLE_FRONTIER = "SingleFrontier"
    DUAL = "Dual"
    SOFT_FALLBACK = "SoftFallback"
    FAIL_SAFE_STOP = "FailSafeStop"
    OBSTACLE_ONLY = "ObstacleOnly"


_CODE_TO_CASE = {
    _kernels.NOMINAL: FilterCase.NOMINAL,
    _kernels.SINGLE1: FilterCase.SINGLE_OBSTACLE,
    _kernels.SINGLE2: FilterCase.SINGLE_FRONTIER,
    _kernels.DUAL: FilterCase.DUAL,
}


class ParallelConstraintsError(ValueError):
    """The two constraint normals are parallel within tolerance."""


class DegenerateConstraintError(ValueError):
    """A constraint normal is too small to project onto."""


@dataclass(frozen=True)
class FilterParams:
    penalty: float = 50.0
    v_max: float = 0.20
    parallel_tol: float = 1e-6
    degenerate_tol: float = 1e-9
    bisection_iters: int = 20
    intervention_tol: float = 1e-6

    def __post_init__(self):
        if not (self.penalty > 0):
            raise ValueError(f"penalty_p must be > 0, got {self.penalty}")
        if not (self.v_max > 0):
            raise ValueError(f"v_max must be > 0, got {self.v_max}")
        if not (self.parallel_tol > 0):
            raise ValueError(f"parallel_tol must be > 0, got {self.parallel_tol}")
        if not (self.degenerate_tol > 0):
            raise ValueError(f"degenerate_tol must be > 0, got {self.degenerate_tol}")
        if int(self.bisection_iters) != self.bisection_iters or self.bisection_iters < 1:
            raise ValueError(f"bisection_iters must be an integer >= 1, got {self.bisection_iters}")
        if not (self.intervention_tol >= 0):
            raise ValueError(f"intervention_tol must be >= 0, got {self.intervention_tol}")


DEFAULT_PARAMS = FilterParams()
# a speed within this relative distance of v_max is rescaled but not reported
# as a clip, so rounding in an already-saturated nominal command is not counted
CLIP_REPORT_RTOL = 1e-9
DEFAULT_OBSTACLE = BarrierSpec(sharpness=2.0, standoff=0.35, gain=1.5, shaping=TANH)
# gain is replaced every tick by the adaptive schedule
DEFAULT_FRONTIER = BarrierSpec(sharpness=2.0, standoff=0.35, gain=1.0, shaping=TANH)
DEFAULT_SCHEDULE = GammaSchedule(0.2, 1.0)


class DualProjection(NamedTuple):
    u: np.ndarray
    case: FilterCase
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class FilterResult:
    u_safe: np.ndarray
    case: FilterCase
    lambda1: float
    lambda2: float
    slack: float
    speed_clipped: bool
    h1: float
    h2: float | None
    gram_det: float
    intervention_magnitude: float
    gamma2: float | None = None

    def intervened(self, tol: float = DEFAULT_PARAMS.intervention_tol) -> bool:
        return self.intervention_magnitude > tol


def gram_determinant(c1: HalfspaceConstraint, c2: HalfspaceConstraint) -> float:
    g1, g2 = c1.g, c2.g
    n11 = g1[0] * g1[0] + g1[1] * g1[1]
    n22 = g2[0] * g2[0] + g2[1] * g2[1]
    n12 = g1[0] * g2[0] + g1[1] * g2[1]
    return float(n11 * n22 - n12 * n12)


def is_parallel(c1: HalfspaceConstraint, c2: HalfspaceConstraint, tol: float) -> bool:
    n11 = float(c1.g @ c1.g)
    n22 = float(c2.g @ c2.g)
    return gram_determinant(c1, c2) < tol * n11 * n22


def project_single(u_des, c: HalfspaceConstraint) -> np.ndarray:
    """Euclidean projection onto one halfspace (identity when already feasible)."""
    if c.degenerate or not (float(c.g @ c.g) > 0):
        raise DegenerateConstraintError("cannot project onto a degenerate constraint")
    u = np.asarray(u_des, dtype=np.float64)
    s = float(c.g[0] * u[0] + c.g[1] * u[1]) - c.b
    if s >= 0.0:
        return u.copy()
    lam = -s / float(c.g[0] * c.g[0] + c.g[1] * c.g[1])
    return np.array([u[0] + lam * c.g[0], u[1] + lam * c.g[1]])


def project_dual(u_des, c1: HalfspaceConstraint, c2: HalfspaceConstraint,
                 params: FilterParams = DEFAULT_PARAMS) -> DualProjection:
    """Projection onto the intersection of two non-parallel halfspaces."""
    if c1.degenerate or c2.degenerate:
        raise DegenerateConstraintError("project_dual needs two non-degenerate constraints")
    if is_parallel(c1, c2, params.parallel_tol):
        raise ParallelConstraintsError("constraint normals are parallel; use solve_soft or the slab rule")
    code, ux, uy, l1, l2, _ = _kernels.project_pair(
        u_des[0], u_des[1], c1.g[0], c1.g[1], c1.b, c2.g[0], c2.g[1], c2.b, params.parallel_tol)
    return DualProjection(np.array([ux, uy]), _CODE_TO_CASE[code], l1, l2)


def _soft_full(u_des, c1, c2, params):
    return _kernels.soft_pair(u_des[0], u_des[1], c1.g[0], c1.g[1], c1.b, c2.g[0], c2.g[1], c2.b,
                              params.parallel_tol, params.penalty, int(params.bisection_iters))


def solve_soft(u_des, c1: HalfspaceConstraint, c2: HalfspaceConstraint,
               params: FilterParams = DEFAULT_PARAMS) -> tuple[np.ndarray, float]:
    """Least-violating velocity with one shared slack.

    Minimizes ``0.5|u - u_des|^2 + 0.5 p delta^2`` subject to
    ``g_i.u >= b_i - delta``. ``delta`` is bracketed by bisection on the
    stationarity residual ``p delta - (mu1 + mu2)`` and then resolved exactly on
    the final bracket. Returns ``(u, delta)``; ``delta`` is 0 for feasible input.
    """
    ux, uy, _, _, delta, _, _ = _soft_full(u_des, c1, c2, params)
    return np.array([ux, uy]), delta


def soft_residual(delta: float, u_des, c1: HalfspaceConstraint, c2: HalfspaceConstraint,
                  params: FilterParams = DEFAULT_PARAMS) -> float:
    """Stationarity residual of the soft QP at a fixed slack (-inf if the relaxed set is empty)."""
    code, _, _, l1, l2, _ = _kernels.project_pair(
        u_des[0], u_des[1], c1.g[0], c1.g[1], c1.b - delta, c2.g[0], c2.g[1], c2.b - delta,
        params.parallel_tol)
    if code == _kernels.INFEASIBLE:
        return -math.inf
    return params.penalty * delta - (l1 + l2)


def speed_ceiling(u, v_max: float) -> np.ndarray:
    if not (v_max > 0):
        raise ValueError(f"v_max must be > 0, got {v_max}")
    u = np.asarray(u, dtype=np.float64)
    n = math.hypot(u[0], u[1])
    if n <= v_max:
        return u.copy()
    return u * (v_max / n)


def _single(udx, udy, c: HalfspaceConstraint):
    gx, gy = float(c.g[0]), float(c.g[1])
    s = gx * udx + gy * udy - c.b
    if s >= 0.0:
        return udx, udy, 0.0, False
    lam = -s / (gx * gx + gy * gy)
    return udx + lam * gx, udy + lam * gy, lam, True


def apply_filter(u_des, obs: SdfSample, frontier: SdfSample | None = None, rho: float | None = None,
                 obstacle_spec: BarrierSpec = DEFAULT_OBSTACLE,
                 frontier_spec: BarrierSpec = DEFAULT_FRONTIER,
                 schedule: GammaSchedule = DEFAULT_SCHEDULE,
                 params: FilterParams = DEFAULT_PARAMS) -> FilterResult:
    """One control tick of the dual-barrier filter.

    ``frontier`` and ``rho`` must both be given or both be ``None`` (no
    significant frontier). A violated constraint whose normal is degenerate
    yields a full stop.
    """
    if (frontier is None) != (rho is None):
        raise ValueError("frontier sample and rho must be given together")
    udx, udy = float(u_des[0]), float(u_des[1])
    c1 = build_constraint(obstacle_spec, obs, degenerate_tol=params.degenerate_tol)
    lam1 = lam2 = slack = 0.0
    gram_det = math.nan
    h2 = gamma2 = None

    if frontier is None:
        if c1.degenerate:
            if c1.b > 0.0:
                case, ux, uy = FilterCase.FAIL_SAFE_STOP, 0.0, 0.0
            else:
                case, ux, uy = FilterCase.OBSTACLE_ONLY, udx, udy
        else:
            ux, uy, lam1, _ = _single(udx, udy, c1)
            case = FilterCase.OBSTACLE_ONLY
    else:
        gamma2 = adaptive_gamma(schedule, rho)
        c2 = build_constraint(frontier_spec, frontier, gain=gamma2, degenerate_tol=params.degenerate_tol)
        h2 = c2.h
        if (c1.degenerate and c1.b > 0.0) or (c2.degenerate and c2.b > 0.0):
            case, ux, uy = FilterCase.FAIL_SAFE_STOP, 0.0, 0.0
        elif c1.degenerate and c2.degenerate:
            case, ux, uy = FilterCase.NOMINAL, udx, udy
        elif c1.degenerate:
            ux, uy, lam2, active = _single(udx, udy, c2)
            case = FilterCase.SINGLE_FRONTIER if active else FilterCase.NOMINAL
        elif c2.degenerate:
            ux, uy, lam1, active = _single(udx, udy, c1)
            case = FilterCase.SINGLE_OBSTACLE if active else FilterCase.NOMINAL
        else:
            g1x, g1y, g2x, g2y = float(c1.g[0]), float(c1.g[1]), float(c2.g[0]), float(c2.g[1])
            code, ux, uy, lam1, lam2, gram_det = _kernels.project_pair(
                udx, udy, g1x, g1y, c1.b, g2x, g2y, c2.b, params.parallel_tol)
            if code == _kernels.INFEASIBLE:
                ux, uy, lam1, lam2, slack, _, _ = _kernels.soft_pair(
                    udx, udy, g1x, g1y, c1.b, g2x, g2y, c2.b, params.parallel_tol,
                    params.penalty, int(params.bisection_iters))
                case = FilterCase.SOFT_FALLBACK
            else:
                case = _CODE_TO_CASE[code]

    ex, ey = ux - udx, uy - udy
    intervention = math.hypot(ex, ey)
    n = math.hypot(ux, uy)
    clipped = n > params.v_max * (1.0 + CLIP_REPORT_RTOL)
    if n > params.v_max:
        scale = params.v_max / n
        ux, uy = ux * scale, uy * scale
    return FilterResult(np.array([ux, uy]), case, lam1, lam2, slack, clipped, c1.h, h2,
                        gram_det, intervention, gamma2)


@dataclass(frozen=True)
class KktReport:
    primal: bool
    dual: bool
    complementary: bool
    stationarity: bool

    @property
    def ok(self) -> bool:
        return self.primal and self.dual and self.complementary and self.stationarity

    def __bool__(self) -> bool:
        return self.ok


def verify_kkt(u_des, c1: HalfspaceConstraint, c2: HalfspaceConstraint, result) -> KktReport:
    """Check the four KKT conditions of a dual projection result.

    ``result`` is a :class:`DualProjection`, a :class:`FilterResult`, or a
    ``(u, lambda1, lambda2)`` tuple.
    """
    if isinstance(result, FilterResult):
        u, l1, l2 = result.u_safe, result.lambda1, result.lambda2
    elif isinstance(result, DualProjection):
        u, l1, l2 = result.u, result.lambda1, result.lambda2
    else:
        u, l1, l2 = result
    u = np.asarray(u, dtype=np.float64)
    ud = np.asarray(u_des, dtype=np.float64)
    s1 = c1.slack(u)
    s2 = c2.slack(u)
    primal = s1 >= -1e-9 and s2 >= -1e-9
    dual = l1 >= -1e-12 and l2 >= -1e-12
    comp = abs(l1 * s1) <= 1e-9 and abs(l2 * s2) <= 1e-9
    resid = u - ud - l1 * c1.g - l2 * c2.g
    stat = float(np.hypot(resid[0], resid[1])) <= 1e-9
    return KktReport(bool(primal), bool(dual), bool(comp), bool(stat))
