"""Pure-Python fallback for the compiled kernels in ``_core.pyx``.

The projection kernels repeat the compiled code operation for operation so
both backends return bit-identical floats. The distance transform uses a
vectorized separable min-plus scan instead of the lower-envelope sweep; both
are exact on integer squared distances.
"""

from __future__ import annotations

import math

import numpy as np

NOMINAL, SINGLE1, SINGLE2, DUAL, INFEASIBLE = 0, 1, 2, 3, 4

_FREE = 0
_OCCUPIED = 100


def edt_sq(feature: np.ndarray) -> np.ndarray:
    """Squared cell distance to the nearest nonzero cell (inf when none)."""
    feature = np.asarray(feature, dtype=bool)
    h, w = feature.shape
    # column pass: nearest feature in the same column, two sweeps
    col = np.full((h, w), np.inf)
    run = np.full(w, np.inf)
    for i in range(h):
        run = np.where(feature[i], 0.0, run + 1.0)
        col[i] = run
    run = np.full(w, np.inf)
    for i in range(h - 1, -1, -1):
        run = np.where(feature[i], 0.0, run + 1.0)
        col[i] = np.minimum(col[i], run)
    col = col * col
    # row pass: d(x) = min_x' (x - x')^2 + col(x')
    xs = np.arange(w, dtype=np.float64)
    offsets = (xs[:, None] - xs[None, :]) ** 2
    out = np.empty((h, w))
    for i in range(h):
        out[i] = np.min(offsets + col[i][None, :], axis=1)
    return out


def raycast(truth, belief, gx: float, gy: float, max_range: float, angles) -> int:
    """Amanatides-Woo traversal of every ray; returns the number of newly known cells."""
    h, w = truth.shape
    ix0 = math.floor(gx)
    iy0 = math.floor(gy)
    if ix0 < 0 or iy0 < 0 or ix0 >= w or iy0 >= h:
        return 0
    tr = truth.tolist()
    changed = 0
    for angle in np.asarray(angles, dtype=np.float64).tolist():
        dx = math.cos(angle)
        dy = math.sin(angle)
        ix, iy = ix0, iy0
        if dx > 0.0:
            step_x, t_delta_x, t_max_x = 1, 1.0 / dx, ((ix + 1) - gx) / dx
        elif dx < 0.0:
            step_x, t_delta_x, t_max_x = -1, -1.0 / dx, (gx - ix) / -dx
        else:
            step_x, t_delta_x, t_max_x = 0, math.inf, math.inf
        if dy > 0.0:
            step_y, t_delta_y, t_max_y = 1, 1.0 / dy, ((iy + 1) - gy) / dy
        elif dy < 0.0:
            step_y, t_delta_y, t_max_y = -1, -1.0 / dy, (gy - iy) / -dy
        else:
            step_y, t_delta_y, t_max_y = 0, math.inf, math.inf
        while True:
            if tr[iy][ix] == _OCCUPIED:
                if belief[iy, ix] != _OCCUPIED:
                    belief[iy, ix] = _OCCUPIED
                    changed += 1
                break
            if belief[iy, ix] != _FREE:
                belief[iy, ix] = _FREE
                changed += 1
            if t_max_x < t_max_y:
                t = t_max_x
                t_max_x += t_delta_x
                ix += step_x
            else:
                t = t_max_y
                t_max_y += t_delta_y
                iy += step_y
            if t > max_range or ix < 0 or iy < 0 or ix >= w or iy >= h:
                break
    return changed


def _project_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par):
    s1 = (g1x * udx + g1y * udy) - b1
    s2 = (g2x * udx + g2y * udy) - b2
    n11 = g1x * g1x + g1y * g1y
    n22 = g2x * g2x + g2y * g2y
    n12 = g1x * g2x + g1y * g2y
    det = n11 * n22 - n12 * n12
    if s1 >= 0.0 and s2 >= 0.0:
        return NOMINAL, udx, udy, 0.0, 0.0, det
    if s1 < 0.0:
        lam = -s1 / n11
        vx = udx + lam * g1x
        vy = udy + lam * g1y
        if (g2x * vx + g2y * vy) - b2 >= 0.0:
            return SINGLE1, vx, vy, lam, 0.0, det
    if s2 < 0.0:
        lam = -s2 / n22
        vx = udx + lam * g2x
        vy = udy + lam * g2y
        if (g1x * vx + g1y * vy) - b1 >= 0.0:
            return SINGLE2, vx, vy, 0.0, lam, det
    if det < eps_par * n11 * n22:
        beta1 = b1 / math.sqrt(n11)
        beta2 = b2 / math.sqrt(n22)
        if n12 > 0.0:
            if det > 0.0:
                l1 = (n22 * -s1 - n12 * -s2) / det
                l2 = (n11 * -s2 - n12 * -s1) / det
                if l1 >= 0.0 and l2 >= 0.0:
                    return (DUAL, udx + l1 * g1x + l2 * g2x, udy + l1 * g1y + l2 * g2y,
                            l1, l2, det)
            if beta1 >= beta2:
                lam = -s1 / n11 if s1 < 0.0 else 0.0
                return SINGLE1, udx + lam * g1x, udy + lam * g1y, lam, 0.0, det
            lam = -s2 / n22 if s2 < 0.0 else 0.0
            return SINGLE2, udx + lam * g2x, udy + lam * g2y, 0.0, lam, det
        if beta1 + beta2 <= 1e-12 * (1.0 + abs(beta1) + abs(beta2)):
            if s1 / math.sqrt(n11) <= s2 / math.sqrt(n22):
                lam = -s1 / n11
                return SINGLE1, udx + lam * g1x, udy + lam * g1y, lam, 0.0, det
            lam = -s2 / n22
            return SINGLE2, udx + lam * g2x, udy + lam * g2y, 0.0, lam, det
        return INFEASIBLE, udx, udy, 0.0, 0.0, det
    l1 = (n22 * -s1 - n12 * -s2) / det
    l2 = (n11 * -s2 - n12 * -s1) / det
    if l1 < 0.0:
        lam = -s2 / n22 if s2 < 0.0 else 0.0
        return SINGLE2, udx + lam * g2x, udy + lam * g2y, 0.0, lam, det
    if l2 < 0.0:
        lam = -s1 / n11 if s1 < 0.0 else 0.0
        return SINGLE1, udx + lam * g1x, udy + lam * g1y, lam, 0.0, det
    return (DUAL, udx + l1 * g1x + l2 * g2x, udy + l1 * g1y + l2 * g2y, l1, l2, det)


def project_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par):
    """Closed-form projection onto two halfspaces.

    Returns ``(code, ux, uy, lam1, lam2, gram_det)``.
    """
    return _project_pair(float(udx), float(udy), float(g1x), float(g1y), float(b1),
                         float(g2x), float(g2y), float(b2), float(eps_par))


def _soft_cost(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, delta):
    res = _project_pair(udx, udy, g1x, g1y, b1 - delta, g2x, g2y, b2 - delta, eps_par)
    if res[0] == INFEASIBLE:
        return math.inf, res
    ex = res[1] - udx
    ey = res[2] - udy
    return 0.5 * (ex * ex + ey * ey) + 0.5 * p * delta * delta, res


def soft_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, iters):
    """Shared-slack soft relaxation; see ``_core.soft_pair``.

    Returns ``(ux, uy, mu1, mu2, delta, lo, hi)``.
    """
    udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p = map(
        float, (udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p))
    n11 = g1x * g1x + g1y * g1y
    n22 = g2x * g2x + g2y * g2y
    n12 = g1x * g2x + g1y * g2y
    r1 = b1 - (g1x * udx + g1y * udy)
    r2 = b2 - (g2x * udx + g2y * udy)
    det = n11 * n22 - n12 * n12
    hi = 0.0
    if r1 > hi:
        hi = r1
    if r2 > hi:
        hi = r2
    hi += 1e-6
    lo = 0.0
    res = _project_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par)
    if res[0] != INFEASIBLE:
        return res[1], res[2], res[3], res[4], 0.0, 0.0, 0.0
    for _ in range(int(iters)):
        mid = 0.5 * (lo + hi)
        res = _project_pair(udx, udy, g1x, g1y, b1 - mid, g2x, g2y, b2 - mid, eps_par)
        if res[0] == INFEASIBLE:
            lo = mid
            continue
        f = p * mid - (res[3] + res[4])
        if f > 0.0:
            hi = mid
        else:
            lo = mid
    cand = [hi, r1 / (p * n11 + 1.0), r2 / (p * n22 + 1.0)]
    parallel = det < eps_par * n11 * n22
    if not parallel:
        m1 = (n22 - n12) / det
        m2 = (n11 - n12) / det
        cand.append((m1 * r1 + m2 * r2) / (p + m1 + m2))
    else:
        cand.append((b1 / math.sqrt(n11) + b2 / math.sqrt(n22))
                    / (1.0 / math.sqrt(n11) + 1.0 / math.sqrt(n22)))
    tol = 1e-9 * (1.0 + hi)
    best_cost = math.inf
    best_delta = hi
    best = None
    chosen = 0
    for i, c in enumerate(cand):
        if c < lo - tol or c > hi + tol or c < 0.0:
            continue
        cost, res = _soft_cost(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, c)
        if cost < best_cost:
            best_cost, best_delta, best, chosen = cost, c, res, i
    if best is None:
        _, best = _soft_cost(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, hi)
        best_delta = hi
        chosen = 0
    ux, uy, mu1, mu2 = best[1], best[2], best[3], best[4]
    if chosen == 3 and parallel:
        m1 = math.sqrt(n11)
        m2 = math.sqrt(n22)
        w = ((ux - udx) * g1x + (uy - udy) * g1y) / m1
        mu1 = (w + m2 * p * best_delta) / (m1 + m2)
        mu2 = p * best_delta - mu1
    return ux, uy, mu1, mu2, best_delta, lo, hi
