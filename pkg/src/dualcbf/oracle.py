"""Slow, independent reference solvers used to check the fast paths.

Nothing here calls the closed-form filter, the distance-transform kernels or
scipy's labelling, so agreement is meaningful.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .barrier import HalfspaceConstraint
from .grid import CellState, OccupancyGrid, SdfKind, SignedDistanceField


class OracleConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    dykstra_iters: int = 10_000
    grid_search_step: float = 1e-4
    grid_search_bound: float = 0.4  # 2 * v_max

    def __post_init__(self):
        if self.dykstra_iters < 1 or not (self.grid_search_step > 0) or not (self.grid_search_bound > 0):
            raise ValueError("oracle settings must be positive")


DEFAULT_ORACLE = OracleConfig()


def _halfspace_project(y: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    # y, g: (n, 2); b: (n,)
    s = np.einsum("ij,ij->i", g, y) - b
    gg = np.einsum("ij,ij->i", g, g)
    step = np.where(s < 0.0, -s / gg, 0.0)
    return y + step[:, None] * g


def dykstra_batch(u_des: np.ndarray, normals: list[np.ndarray], offsets: list[np.ndarray],
                  iters: int, stop_when_fixed: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Dykstra's algorithm on many independent instances at once.

    ``u_des`` is ``(n, 2)``; ``normals[i]`` is ``(n, 2)`` and ``offsets[i]`` is
    ``(n,)`` for constraint ``i``. Returns the projections and the largest
    constraint violation per instance.
    """
    out = np.array(u_des, dtype=np.float64, copy=True)
    normals = [np.asarray(g, dtype=np.float64) for g in normals]
    offsets = [np.asarray(b, dtype=np.float64) for b in offsets]
    # instances at an exact fixed point (iterate and every correction unchanged over a
    # full cycle) are frozen; further cycles would reproduce them bit for bit
    idx = np.arange(out.shape[0])
    x = out.copy()
    gs, bs = normals, offsets
    corr = [np.zeros_like(x) for _ in normals]
    for _ in range(iters):
        prev, prev_corr = x, list(corr)
        for i, (g, b) in enumerate(zip(gs, bs)):
            y = x + corr[i]
            x = _halfspace_project(y, g, b)
            corr[i] = y - x
        if stop_when_fixed:
            moving = np.any(prev != x, axis=1)
            for c_old, c_new in zip(prev_corr, corr):
                moving |= np.any(c_old != c_new, axis=1)
            if not moving.all():
                out[idx[~moving]] = x[~moving]
                idx, x = idx[moving], x[moving]
                if idx.size == 0:
                    break
                corr = [c[moving] for c in corr]
                gs = [g[idx] for g in normals]
                bs = [b[idx] for b in offsets]
    out[idx] = x
    viol = np.zeros(out.shape[0])
    for g, b in zip(normals, offsets):
        viol = np.maximum(viol, b - np.einsum("ij,ij->i", g, out))
    return out, viol


def dykstra_project(u_des, constraints: list[HalfspaceConstraint],
                    cfg: OracleConfig = DEFAULT_ORACLE) -> np.ndarray:
    """Projection of ``u_des`` onto an intersection of halfspaces by Dykstra's algorithm."""
    u = np.asarray(u_des, dtype=np.float64).reshape(1, 2)
    normals = [np.asarray(c.g, dtype=np.float64).reshape(1, 2) for c in constraints]
    offsets = [np.array([c.b], dtype=np.float64) for c in constraints]
    x, viol = dykstra_batch(u, normals, offsets, cfg.dykstra_iters)
    if viol[0] > 1e-8:
        raise OracleConvergenceError(f"Dykstra did not converge: violation {viol[0]:.3g}")
    return x[0]


def soft_qp_grid_search(u_des, c1: HalfspaceConstraint, c2: HalfspaceConstraint, p: float,
                        cfg: OracleConfig = DEFAULT_ORACLE) -> tuple[np.ndarray, float]:
    """Grid search over the shared slack of the soft QP (one instance)."""
    u, d = soft_qp_grid_search_batch(np.reshape(np.asarray(u_des, dtype=np.float64), (1, 2)),
                                     [(c1, c2)], np.array([p], dtype=np.float64), cfg)
    return u[0], float(d[0])


def soft_qp_grid_search_batch(u_des: np.ndarray, pairs: list[tuple[HalfspaceConstraint, HalfspaceConstraint]],
                              penalties: np.ndarray, cfg: OracleConfig = DEFAULT_ORACLE
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Grid search over the shared slack of the soft QP, many instances at once.

    For a fixed slack the optimal velocity is the hard projection onto the
    relaxed halfspaces (computed here by Dykstra), so the search is 1-D. The
    best cost as a function of the slack is convex on the interval of slacks
    that make the relaxed pair feasible, so the discrete minimum of a coarse
    grid brackets the true one: a grid a hundred times coarser than
    ``cfg.grid_search_step`` is searched first, then ``cfg.grid_search_step``
    inside the bracket, then a hundredth of it.
    """
    ud = np.asarray(u_des, dtype=np.float64).reshape(-1, 2)
    n = ud.shape[0]
    g1 = np.array([np.asarray(c1.g, float) for c1, _ in pairs]).reshape(n, 2)
    g2 = np.array([np.asarray(c2.g, float) for _, c2 in pairs]).reshape(n, 2)
    b1 = np.array([c1.b for c1, _ in pairs], dtype=np.float64)
    b2 = np.array([c2.b for _, c2 in pairs], dtype=np.float64)
    pen = np.asarray(penalties, dtype=np.float64).reshape(n)
    # slack = top satisfies both relaxed constraints at u_des itself
    top = np.maximum(0.0, np.maximum(b1 - np.einsum("ij,ij->i", g1, ud), b2 - np.einsum("ij,ij->i", g2, ud)))

    best_cost = np.full(n, np.inf)
    best_x = ud.copy()
    best_d = np.zeros(n)
    step = 100.0 * cfg.grid_search_step
    grids = [np.append(np.arange(0.0, top[i], step), top[i]) for i in range(n)]
    for _ in range(3):
        owner = np.repeat(np.arange(n), [g.size for g in grids])
        deltas = np.concatenate(grids)
        x, viol = dykstra_batch(ud[owner], [g1[owner], g2[owner]],
                                [b1[owner] - deltas, b2[owner] - deltas], 2000)
        diff = x - ud[owner]
        cost = 0.5 * np.einsum("ij,ij->i", diff, diff) + 0.5 * pen[owner] * deltas ** 2
        cost[viol > 1e-8] = np.inf
        bounds = np.cumsum([0] + [g.size for g in grids])
        for i in range(n):
            seg = cost[bounds[i]:bounds[i + 1]]
            k = bounds[i] + int(np.argmin(seg))
            if cost[k] <= best_cost[i]:
                best_cost[i], best_x[i], best_d[i] = cost[k], x[k], deltas[k]
        fine = step / 100.0
        grids = []
        for i in range(n):
            lo, hi = max(best_d[i] - step, 0.0), min(best_d[i] + step, top[i])
            grids.append(np.linspace(lo, hi, int(round((hi - lo) / fine)) + 1))
        step = fine
    return best_x, best_d


def _components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """8-connected components by breadth-first flood fill, in scan order."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for iy in range(h):
        for ix in range(w):
            if not mask[iy, ix] or seen[iy, ix]:
                continue
            comp = []
            queue = deque([(iy, ix)])
            seen[iy, ix] = True
            while queue:
                cy, cx = queue.popleft()
                comp.append((cx, cy))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
            comps.append(comp)
    return comps


def brute_force_sdf(grid: OccupancyGrid, kind: SdfKind = SdfKind.OBSTACLE,
                    n_min: int = 25) -> SignedDistanceField | None:
    """All-pairs nearest-opposite-cell signed distance (quadratic cost)."""
    if grid.width * grid.height > 64 * 64:
        raise ValueError("brute_force_sdf is limited to 64x64 grids")
    if kind is SdfKind.OBSTACLE:
        negative = grid.cells == CellState.OCCUPIED
    else:
        negative = np.zeros(grid.cells.shape, dtype=bool)
        for comp in _components(grid.cells == CellState.UNKNOWN):
            if len(comp) >= n_min:
                for cx, cy in comp:
                    negative[cy, cx] = True
        if not negative.any():
            return None
    h, w = negative.shape
    cap = grid.resolution * max(math.sqrt((w - 1) ** 2 + (h - 1) ** 2), 1.0)
    iy, ix = np.mgrid[0:h, 0:w]
    pts = np.column_stack([ix.ravel(), iy.ravel()]).astype(np.int64)
    neg = negative.ravel()
    values = np.empty(h * w)
    for sign, src, dst in ((1.0, ~neg, neg), (-1.0, neg, ~neg)):
        targets = pts[dst]
        for idx in np.flatnonzero(src):
            if targets.shape[0] == 0:
                values[idx] = sign * cap
                continue
            d = targets - pts[idx]
            d2 = int(np.min(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]))
            values[idx] = sign * (np.sqrt(np.float64(d2)) * grid.resolution)
    return SignedDistanceField(values.reshape(h, w), kind, grid.resolution, grid.origin)
