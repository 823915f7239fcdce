# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.

Must stay numerically identical to ``_pykernels``: same operation order,
no fused multiply-add (built with ``-ffp-contract=off``).
"""

import numpy as np

from libc.math cimport sqrt, floor, INFINITY
from libc.stdlib cimport malloc, free

DEF NOMINAL = 0
DEF SINGLE1 = 1
DEF SINGLE2 = 2
DEF DUAL = 3
DEF INFEASIBLE = 4

DEF UNKNOWN = -1
DEF FREE = 0
DEF OCCUPIED = 100


cdef void _dt1d(double* f, Py_ssize_t n, double* d, Py_ssize_t* v, double* z) noexcept nogil:
    # lower envelope of parabolas rooted at finite sites only
    cdef Py_ssize_t q, k = -1
    cdef double s
    for q in range(n):
        if f[q] == INFINITY:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -INFINITY
            z[1] = INFINITY
            continue
        while True:
            s = ((f[q] + <double>(q * q)) - (f[v[k]] + <double>(v[k] * v[k]))) / <double>(2 * q - 2 * v[k])
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INFINITY
    if k < 0:
        for q in range(n):
            d[q] = INFINITY
        return
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = <double>((q - v[k]) * (q - v[k])) + f[v[k]]


def edt_sq(const unsigned char[:, ::1] feature):
    """Squared cell distance to the nearest nonzero cell (inf when none)."""
    cdef Py_ssize_t h = feature.shape[0], w = feature.shape[1]
    cdef Py_ssize_t n = h if h > w else w
    cdef Py_ssize_t i, j
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* f = <double*>malloc(n * sizeof(double))
    cdef double* d = <double*>malloc(n * sizeof(double))
    cdef double* z = <double*>malloc((n + 1) * sizeof(double))
    cdef Py_ssize_t* v = <Py_ssize_t*>malloc(n * sizeof(Py_ssize_t))
    if f == NULL or d == NULL or z == NULL or v == NULL:
        free(f); free(d); free(z); free(v)
        raise MemoryError()
    try:
        with nogil:
            for j in range(w):
                for i in range(h):
                    f[i] = 0.0 if feature[i, j] else INFINITY
                _dt1d(f, h, d, v, z)
                for i in range(h):
                    out[i, j] = d[i]
            for i in range(h):
                for j in range(w):
                    f[j] = out[i, j]
                _dt1d(f, w, d, v, z)
                for j in range(w):
                    out[i, j] = d[j]
    finally:
        free(f); free(d); free(z); free(v)
    return out_arr


def raycast(const signed char[:, ::1] truth, signed char[:, ::1] belief,
            double gx, double gy, double max_range, const double[::1] angles):
    """Amanatides-Woo traversal of every ray; returns the number of newly known cells.

    ``gx, gy`` are in cell units with cell ``i`` spanning ``[i, i+1)``.
    """
    cdef Py_ssize_t h = truth.shape[0], w = truth.shape[1]
    cdef Py_ssize_t k, ix, iy, step_x, step_y
    cdef Py_ssize_t ix0 = <Py_ssize_t>floor(gx), iy0 = <Py_ssize_t>floor(gy)
    cdef double dx, dy, t_max_x, t_max_y, t_delta_x, t_delta_y, t
    cdef long changed = 0
    cdef signed char state
    if ix0 < 0 or iy0 < 0 or ix0 >= w or iy0 >= h:
        return 0
    for k in range(angles.shape[0]):
        dx = _cos(angles[k])
        dy = _sin(angles[k])
        ix = ix0
        iy = iy0
        if dx > 0.0:
            step_x = 1
            t_delta_x = 1.0 / dx
            t_max_x = ((ix + 1) - gx) / dx
        elif dx < 0.0:
            step_x = -1
            t_delta_x = -1.0 / dx
            t_max_x = (gx - ix) / -dx
        else:
            step_x = 0
            t_delta_x = INFINITY
            t_max_x = INFINITY
        if dy > 0.0:
            step_y = 1
            t_delta_y = 1.0 / dy
            t_max_y = ((iy + 1) - gy) / dy
        elif dy < 0.0:
            step_y = -1
            t_delta_y = -1.0 / dy
            t_max_y = (gy - iy) / -dy
        else:
            step_y = 0
            t_delta_y = INFINITY
            t_max_y = INFINITY
        while True:
            state = truth[iy, ix]
            if state == OCCUPIED:
                if belief[iy, ix] != OCCUPIED:
                    belief[iy, ix] = OCCUPIED
                    changed += 1
                break
            if belief[iy, ix] != FREE:
                belief[iy, ix] = FREE
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


cdef extern from "math.h" nogil:
    double _cos "cos"(double)
    double _sin "sin"(double)


cdef inline double _dot(double ax, double ay, double bx, double by) noexcept nogil:
    return ax * bx + ay * by


cdef int _project_pair(double udx, double udy,
                       double g1x, double g1y, double b1,
                       double g2x, double g2y, double b2,
                       double eps_par, double* out) noexcept nogil:
    # out = [ux, uy, lam1, lam2, gram_det]
    cdef double s1 = _dot(g1x, g1y, udx, udy) - b1
    cdef double s2 = _dot(g2x, g2y, udx, udy) - b2
    cdef double n11 = _dot(g1x, g1y, g1x, g1y)
    cdef double n22 = _dot(g2x, g2y, g2x, g2y)
    cdef double n12 = _dot(g1x, g1y, g2x, g2y)
    cdef double det = n11 * n22 - n12 * n12
    cdef double lam, vx, vy, l1, l2, beta1, beta2
    out[4] = det
    if s1 >= 0.0 and s2 >= 0.0:
        out[0] = udx; out[1] = udy; out[2] = 0.0; out[3] = 0.0
        return NOMINAL
    if s1 < 0.0:
        lam = -s1 / n11
        vx = udx + lam * g1x
        vy = udy + lam * g1y
        if _dot(g2x, g2y, vx, vy) - b2 >= 0.0:
            out[0] = vx; out[1] = vy; out[2] = lam; out[3] = 0.0
            return SINGLE1
    if s2 < 0.0:
        lam = -s2 / n22
        vx = udx + lam * g2x
        vy = udy + lam * g2y
        if _dot(g1x, g1y, vx, vy) - b1 >= 0.0:
            out[0] = vx; out[1] = vy; out[2] = 0.0; out[3] = lam
            return SINGLE2
    if det < eps_par * n11 * n22:
        beta1 = b1 / sqrt(n11)
        beta2 = b2 / sqrt(n22)
        if n12 > 0.0:
            if det > 0.0:
                l1 = (n22 * -s1 - n12 * -s2) / det
                l2 = (n11 * -s2 - n12 * -s1) / det
                if l1 >= 0.0 and l2 >= 0.0:
                    out[0] = udx + l1 * g1x + l2 * g2x
                    out[1] = udy + l1 * g1y + l2 * g2y
                    out[2] = l1
                    out[3] = l2
                    return DUAL
            # same direction: the tighter halfspace subsumes the other
            if beta1 >= beta2:
                lam = -s1 / n11 if s1 < 0.0 else 0.0
                out[0] = udx + lam * g1x; out[1] = udy + lam * g1y; out[2] = lam; out[3] = 0.0
                return SINGLE1
            lam = -s2 / n22 if s2 < 0.0 else 0.0
            out[0] = udx + lam * g2x; out[1] = udy + lam * g2y; out[2] = 0.0; out[3] = lam
            return SINGLE2
        if beta1 + beta2 <= 1e-12 * (1.0 + (beta1 if beta1 > 0.0 else -beta1) + (beta2 if beta2 > 0.0 else -beta2)):
            # nonempty slab, verification lost to rounding: project on the worse one
            if s1 / sqrt(n11) <= s2 / sqrt(n22):
                lam = -s1 / n11
                out[0] = udx + lam * g1x; out[1] = udy + lam * g1y; out[2] = lam; out[3] = 0.0
                return SINGLE1
            lam = -s2 / n22
            out[0] = udx + lam * g2x; out[1] = udy + lam * g2y; out[2] = 0.0; out[3] = lam
            return SINGLE2
        out[0] = udx; out[1] = udy; out[2] = 0.0; out[3] = 0.0
        return INFEASIBLE
    l1 = (n22 * -s1 - n12 * -s2) / det
    l2 = (n11 * -s2 - n12 * -s1) / det
    if l1 < 0.0:
        lam = -s2 / n22 if s2 < 0.0 else 0.0
        out[0] = udx + lam * g2x; out[1] = udy + lam * g2y; out[2] = 0.0; out[3] = lam
        return SINGLE2
    if l2 < 0.0:
        lam = -s1 / n11 if s1 < 0.0 else 0.0
        out[0] = udx + lam * g1x; out[1] = udy + lam * g1y; out[2] = lam; out[3] = 0.0
        return SINGLE1
    out[0] = udx + l1 * g1x + l2 * g2x
    out[1] = udy + l1 * g1y + l2 * g2y
    out[2] = l1
    out[3] = l2
    return DUAL


def project_pair(double udx, double udy, double g1x, double g1y, double b1,
                 double g2x, double g2y, double b2, double eps_par):
    """Closed-form projection onto two halfspaces.

    Returns ``(code, ux, uy, lam1, lam2, gram_det)``.
    """
    cdef double out[5]
    cdef int code = _project_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, out)
    return code, out[0], out[1], out[2], out[3], out[4]


cdef double _soft_cost(double udx, double udy, double g1x, double g1y, double b1,
                       double g2x, double g2y, double b2, double eps_par,
                       double p, double delta, double* out) noexcept nogil:
    cdef int code = _project_pair(udx, udy, g1x, g1y, b1 - delta, g2x, g2y, b2 - delta, eps_par, out)
    cdef double ex, ey
    if code == INFEASIBLE:
        return INFINITY
    ex = out[0] - udx
    ey = out[1] - udy
    return 0.5 * (ex * ex + ey * ey) + 0.5 * p * delta * delta


def soft_pair(double udx, double udy, double g1x, double g1y, double b1,
              double g2x, double g2y, double b2, double eps_par,
              double p, int iters):
    """Soft relaxation with one shared slack: bisection on the stationarity
    residual, then an exact solve of the piecewise-linear residual inside the
    final bracket.

    Returns ``(ux, uy, mu1, mu2, delta, lo, hi)``.
    """
    cdef double out[5]
    cdef double best[5]
    cdef double n11 = _dot(g1x, g1y, g1x, g1y)
    cdef double n22 = _dot(g2x, g2y, g2x, g2y)
    cdef double n12 = _dot(g1x, g1y, g2x, g2y)
    cdef double r1 = b1 - _dot(g1x, g1y, udx, udy)
    cdef double r2 = b2 - _dot(g2x, g2y, udx, udy)
    cdef double det = n11 * n22 - n12 * n12
    cdef double lo = 0.0, hi, mid, f, cost, best_cost, best_delta, tol, w, m1, m2
    cdef double cand[5]
    cdef int code, i, chosen, ncand = 0
    hi = 0.0
    if r1 > hi:
        hi = r1
    if r2 > hi:
        hi = r2
    hi += 1e-6
    code = _project_pair(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, out)
    if code != INFEASIBLE:
        return out[0], out[1], out[2], out[3], 0.0, 0.0, 0.0
    for i in range(iters):
        mid = 0.5 * (lo + hi)
        code = _project_pair(udx, udy, g1x, g1y, b1 - mid, g2x, g2y, b2 - mid, eps_par, out)
        if code == INFEASIBLE:
            lo = mid
            continue
        f = p * mid - (out[2] + out[3])
        if f > 0.0:
            hi = mid
        else:
            lo = mid
    # residual roots of each active-set regime
    cand[ncand] = hi; ncand += 1
    cand[ncand] = r1 / (p * n11 + 1.0); ncand += 1
    cand[ncand] = r2 / (p * n22 + 1.0); ncand += 1
    if det >= eps_par * n11 * n22:
        m1 = (n22 - n12) / det
        m2 = (n11 - n12) / det
        cand[ncand] = (m1 * r1 + m2 * r2) / (p + m1 + m2); ncand += 1
    else:
        cand[ncand] = (b1 / sqrt(n11) + b2 / sqrt(n22)) / (1.0 / sqrt(n11) + 1.0 / sqrt(n22)); ncand += 1
    tol = 1e-9 * (1.0 + hi)
    best_cost = INFINITY
    best_delta = hi
    chosen = 0
    for i in range(ncand):
        if cand[i] < lo - tol or cand[i] > hi + tol or cand[i] < 0.0:
            continue
        cost = _soft_cost(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, cand[i], out)
        if cost < best_cost:
            best_cost = cost
            best_delta = cand[i]
            chosen = i
            best[0] = out[0]; best[1] = out[1]; best[2] = out[2]; best[3] = out[3]
    if best_cost == INFINITY:
        _soft_cost(udx, udy, g1x, g1y, b1, g2x, g2y, b2, eps_par, p, hi, best)
        best_delta = hi
        chosen = 0
    if chosen == 3 and det < eps_par * n11 * n22:
        # collapsed slab: multipliers are not unique, pick the pair meeting p*delta = mu1 + mu2
        m1 = sqrt(n11)
        m2 = sqrt(n22)
        w = ((best[0] - udx) * g1x + (best[1] - udy) * g1y) / m1
        best[2] = (w + m2 * p * best_delta) / (m1 + m2)
        best[3] = p * best_delta - best[2]
    return best[0], best[1], best[2], best[3], best_delta, lo, hi
