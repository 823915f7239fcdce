"""Seeded oracle sweeps comparing the fast paths against the reference solvers.

Each sweep returns :class:`CheckResult` records; the CLI ``verify`` command
prints them and the acceptance tests assert on them.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .barrier import ERF, IDENTITY, RATIONAL, TANH, HalfspaceConstraint, check_admissibility
from .filter import (DEFAULT_PARAMS, FilterParams, apply_filter, project_dual, solve_soft,
                     verify_kkt)
from .grid import (CellState, OccupancyGrid, SdfKind, SdfSample, compute_frontier_sdf,
                   compute_obstacle_sdf, extract_frontier_clusters, raw_gradient_norm)
from .oracle import OracleConfig, brute_force_sdf, dykstra_batch, soft_qp_grid_search_batch


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.elapsed:.2f} s)"


@dataclass(frozen=True)
class DualInstances:
    """``n`` random two-halfspace problems stored column-wise."""

    u_des: np.ndarray  # (n, 2)
    g1: np.ndarray  # (n, 2)
    b1: np.ndarray  # (n,)
    g2: np.ndarray
    b2: np.ndarray

    def __len__(self) -> int:
        return self.u_des.shape[0]

    def constraints(self, k: int) -> tuple[HalfspaceConstraint, HalfspaceConstraint]:
        return (HalfspaceConstraint(self.g1[k], float(self.b1[k])),
                HalfspaceConstraint(self.g2[k], float(self.b2[k])))


def random_dual_instances(n: int, seed: int = 0) -> DualInstances:
    """Normals with norms in [0.1, 2] meeting at an angle in [10, 170] degrees;
    offsets in [-1, 1]; desired velocities in [-1, 1]^2."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 2.0 * math.pi, n)
    angle = np.radians(rng.uniform(10.0, 170.0, n)) * rng.choice((-1.0, 1.0), n)
    n1 = rng.uniform(0.1, 2.0, n)
    n2 = rng.uniform(0.1, 2.0, n)
    g1 = n1[:, None] * np.column_stack([np.cos(base), np.sin(base)])
    g2 = n2[:, None] * np.column_stack([np.cos(base + angle), np.sin(base + angle)])
    b1 = rng.uniform(-1.0, 1.0, n)
    b2 = rng.uniform(-1.0, 1.0, n)
    u_des = rng.uniform(-1.0, 1.0, (n, 2))
    return DualInstances(u_des, g1, b1, g2, b2)


@dataclass(frozen=True)
class DualSweep:
    instances: DualInstances
    closed: np.ndarray  # (n, 2) closed-form projections
    oracle: np.ndarray  # (n, 2) Dykstra projections
    oracle_violation: np.ndarray
    kkt_ok: np.ndarray  # (n,) bool
    closed_seconds: float
    total_seconds: float

    @property
    def max_error(self) -> float:
        return float(np.max(np.abs(self.closed - self.oracle)))


def dual_sweep(n: int = 10_000, seed: int = 0, params: FilterParams = DEFAULT_PARAMS,
               oracle_iters: int = 10_000) -> DualSweep:
    """Closed-form projections with KKT certificates, and the Dykstra reference."""
    start = time.perf_counter()
    inst = random_dual_instances(n, seed)
    closed = np.empty((n, 2))
    kkt = np.empty(n, dtype=bool)
    for k in range(n):
        c1, c2 = inst.constraints(k)
        res = project_dual(inst.u_des[k], c1, c2, params)
        closed[k] = res.u
        kkt[k] = verify_kkt(inst.u_des[k], c1, c2, res).ok
    closed_seconds = time.perf_counter() - start
    oracle, viol = dykstra_batch(inst.u_des, [inst.g1, inst.g2], [inst.b1, inst.b2], oracle_iters)
    return DualSweep(inst, closed, oracle, viol, kkt, closed_seconds, time.perf_counter() - start)


def check_dual_agreement(sweep: DualSweep, tolerance: float = 1e-6, time_budget: float = 10.0) -> CheckResult:
    err = np.max(np.abs(sweep.closed - sweep.oracle), axis=1)
    bad = int(np.count_nonzero(err > tolerance))
    oracle_ok = bool(np.all(sweep.oracle_violation <= 1e-8))
    passed = bad == 0 and oracle_ok and sweep.total_seconds < time_budget
    detail = (f"{len(sweep.instances)} instances, {bad} beyond {tolerance:g}, max error {err.max():.2e}, "
              f"oracle max violation {sweep.oracle_violation.max():.1e}, "
              f"sweep {sweep.total_seconds:.2f} s (budget {time_budget:g} s)")
    return CheckResult("closed form vs Dykstra", passed, detail, sweep.total_seconds)


def check_kkt(sweep: DualSweep) -> CheckResult:
    ok = int(np.count_nonzero(sweep.kkt_ok))
    n = len(sweep.instances)
    return CheckResult("KKT certificate", ok == n, f"{ok}/{n} instances pass all four conditions",
                       sweep.closed_seconds)


def random_grid(rng: np.random.Generator, width: int, height: int, unknown: bool = True) -> OccupancyGrid:
    """Random occupancy (density in [0, 0.4]) plus, optionally, unknown blobs."""
    cells = np.zeros((height, width), dtype=np.int8)
    density = rng.uniform(0.0, 0.4)
    cells[rng.random((height, width)) < density] = CellState.OCCUPIED
    if unknown:
        for _ in range(int(rng.integers(0, 4))):
            w = int(rng.integers(1, max(1, width // 2) + 1))
            h = int(rng.integers(1, max(1, height // 2) + 1))
            x = int(rng.integers(0, width - w + 1))
            y = int(rng.integers(0, height - h + 1))
            cells[y:y + h, x:x + w] = CellState.UNKNOWN
    return OccupancyGrid(cells, 0.1)


def check_edt(n: int = 50, seed: int = 0, max_size: int = 48, n_min: int = 25) -> CheckResult:
    """Obstacle and frontier SDFs against the all-pairs scan, bitwise."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    mismatches = []
    for k in range(n):
        grid = random_grid(rng, int(rng.integers(1, max_size + 1)), int(rng.integers(1, max_size + 1)))
        fast = compute_obstacle_sdf(grid)
        ref = brute_force_sdf(grid, SdfKind.OBSTACLE)
        if not np.array_equal(fast.values, ref.values):
            mismatches.append(f"obstacle #{k}")
        fast_f = compute_frontier_sdf(grid, extract_frontier_clusters(grid, n_min))
        ref_f = brute_force_sdf(grid, SdfKind.FRONTIER, n_min)
        if (fast_f is None) != (ref_f is None) or (
                fast_f is not None and not np.array_equal(fast_f.values, ref_f.values)):
            mismatches.append(f"frontier #{k}")
    detail = f"{n} grids up to {max_size}x{max_size}, obstacle and frontier fields, {len(mismatches)} mismatches"
    if mismatches:
        detail += f" ({', '.join(mismatches[:5])})"
    return CheckResult("EDT vs brute force", not mismatches, detail, time.perf_counter() - start)


def _blocky_world(rng: np.random.Generator, size: int) -> OccupancyGrid:
    cells = np.zeros((size, size), dtype=np.int8)
    for _ in range(int(rng.integers(3, 9))):
        w, h = (int(v) for v in rng.integers(2, size // 5, 2))
        x = int(rng.integers(0, size - w))
        y = int(rng.integers(0, size - h))
        cells[y:y + h, x:x + w] = CellState.OCCUPIED
    return OccupancyGrid(cells, 0.1)


def eikonal_fraction(grid: OccupancyGrid) -> tuple[int, int]:
    """(cells with raw gradient norm in [0.9, 1.1], cells tested) over free cells
    at least two cells from obstacles and from the grid edge."""
    sdf = compute_obstacle_sdf(grid)
    norm = raw_gradient_norm(sdf)
    r = grid.resolution
    test = (grid.cells == CellState.FREE) & (sdf.values >= 2.0 * r)
    test[:2, :] = test[-2:, :] = False
    test[:, :2] = test[:, -2:] = False
    good = test & (norm >= 0.9) & (norm <= 1.1)
    return int(np.count_nonzero(good)), int(np.count_nonzero(test))


def check_eikonal(n: int = 20, seed: int = 0, size: int = 100, required: float = 0.95) -> CheckResult:
    """Fraction of in-band gradient norms, pooled over all grids.

    The misses sit on the ridges where two obstacles are equidistant; there
    the exact field has no gradient and central differences cancel.
    """
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 1.0
    good_total = tested_total = 0
    for _ in range(n):
        good, tested = eikonal_fraction(_blocky_world(rng, size))
        good_total += good
        tested_total += tested
        worst = min(worst, good / tested if tested else 1.0)
    pooled = good_total / max(tested_total, 1)
    detail = (f"{n} grids {size}x{size}, {pooled:.4f} of {tested_total} tested free cells in band "
              f"(need >= {required}); worst single grid {worst:.4f}")
    return CheckResult("Eikonal gradient norm", pooled >= required, detail, time.perf_counter() - start)


def parallel_infeasible_instances(n: int, seed: int = 0) -> list[tuple]:
    """Anti-parallel pairs with an empty intersection: ``(u_des, c1, c2, p)`` tuples."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        theta = rng.uniform(0.0, 2.0 * math.pi)
        unit = np.array([math.cos(theta), math.sin(theta)])
        s1, s2 = rng.uniform(0.1, 2.0, 2)
        b1, b2 = rng.uniform(-1.0, 1.0, 2)
        # n.u >= b1/s1 and n.u <= -b2/s2 cannot both hold
        if b1 / s1 + b2 / s2 <= 1e-3:
            continue
        p = float(10.0 ** rng.uniform(0.0, 2.0))
        u_des = rng.uniform(-1.0, 1.0, 2)
        out.append((u_des, HalfspaceConstraint(s1 * unit, float(b1)),
                    HalfspaceConstraint(-s2 * unit, float(b2)), p))
    return out


def check_soft_qp(n: int = 200, seed: int = 0, tolerance: float = 1e-3,
                  oracle: OracleConfig = OracleConfig()) -> CheckResult:
    start = time.perf_counter()
    instances = parallel_infeasible_instances(n, seed)
    u_refs, d_refs = soft_qp_grid_search_batch(np.array([inst[0] for inst in instances]),
                                               [(inst[1], inst[2]) for inst in instances],
                                               np.array([inst[3] for inst in instances]), oracle)
    worst_u = worst_d = 0.0
    bad = 0
    for (u_des, c1, c2, p), u_ref, d_ref in zip(instances, u_refs, d_refs):
        u, delta = solve_soft(u_des, c1, c2, FilterParams(penalty=p))
        eu = float(np.max(np.abs(u - u_ref)))
        ed = abs(delta - float(d_ref))
        worst_u, worst_d = max(worst_u, eu), max(worst_d, ed)
        bad += eu > tolerance or ed > tolerance
    detail = f"{n} parallel-infeasible instances, {bad} beyond {tolerance:g}, max |du| {worst_u:.1e}, max |d delta| {worst_d:.1e}"
    return CheckResult("soft QP vs grid search", bad == 0, detail, time.perf_counter() - start)


def check_soft_feasible(n: int = 1000, seed: int = 0) -> CheckResult:
    """Zero slack and agreement with the hard projection whenever the hard problem is feasible."""
    start = time.perf_counter()
    inst = random_dual_instances(n, seed)
    bad = 0
    for k in range(n):
        c1, c2 = inst.constraints(k)
        u, delta = solve_soft(inst.u_des[k], c1, c2)
        hard = project_dual(inst.u_des[k], c1, c2).u
        bad += delta != 0.0 or not np.array_equal(u, hard)
    rng = np.random.default_rng(seed + 1)
    for _ in range(n // 10):
        unit = rng.normal(size=2)
        unit /= np.linalg.norm(unit)
        s1, s2 = rng.uniform(0.1, 2.0, 2)
        lo = rng.uniform(-1.0, 1.0)
        hi = lo + rng.uniform(0.0, 1.0)
        # slab lo <= n.u <= hi is nonempty
        c1 = HalfspaceConstraint(s1 * unit, float(s1 * lo))
        c2 = HalfspaceConstraint(-s2 * unit, float(-s2 * hi))
        _, delta = solve_soft(rng.uniform(-1.0, 1.0, 2), c1, c2)
        bad += delta != 0.0
    total = n + n // 10
    return CheckResult("soft QP zero slack on feasible input", bad == 0,
                       f"{total - bad}/{total} feasible instances with delta = 0", time.perf_counter() - start)


def check_soft_symmetric() -> CheckResult:
    start = time.perf_counter()
    c1 = HalfspaceConstraint(np.array([1.0, 0.0]), 1.0)
    c2 = HalfspaceConstraint(np.array([-1.0, 0.0]), 1.0)
    u, delta = solve_soft(np.zeros(2), c1, c2, FilterParams(penalty=10.0))
    ok = u[0] == 0.0 and u[1] == 0.0 and delta == 1.0
    return CheckResult("soft QP symmetric anti-parallel case", ok,
                       f"u = ({float(u[0])!r}, {float(u[1])!r}), delta = {float(delta)!r} (expect exactly 0, 0, 1)",
                       time.perf_counter() - start)


def check_admissibility_suite() -> CheckResult:
    start = time.perf_counter()
    reports = {fn.name: check_admissibility(fn) for fn in (TANH, RATIONAL, ERF, IDENTITY)}
    ok = all(reports[name].admissible for name in ("tanh", "rational", "erf"))
    ident = reports["identity"]
    ok = ok and not ident.t4_bounded and not ident.admissible
    detail = ", ".join(f"{name} {'admissible' if r.admissible else 'not admissible'}"
                       for name, r in reports.items())
    return CheckResult("shaping admissibility", ok, detail, time.perf_counter() - start)


def filter_latency(instances: DualInstances, repeats: int = 1) -> float:
    """Median wall time in seconds of one ``apply_filter`` call.

    Each instance supplies the barrier gradient directions (its two normals);
    distances are drawn so that both constraints span slack, active and
    conflicting configurations.
    """
    rng = np.random.default_rng(0)
    n = len(instances)
    phi1 = rng.uniform(0.0, 1.5, n)
    phi2 = rng.uniform(0.0, 1.5, n)
    rho = rng.uniform(0.0, 1.0, n)
    times = []
    clock = time.perf_counter_ns
    for k in range(n):
        g1 = instances.g1[k] / np.linalg.norm(instances.g1[k])
        g2 = instances.g2[k] / np.linalg.norm(instances.g2[k])
        obs = SdfSample(float(phi1[k]), g1, False, 1.0)
        front = SdfSample(float(phi2[k]), g2, False, 1.0)
        u = instances.u_des[k] * 0.2
        r = float(rho[k])
        for _ in range(repeats):
            t0 = clock()
            apply_filter(u, obs, front, r)
            times.append(clock() - t0)
    return statistics.median(times) * 1e-9


def run_verification(tolerance: float = 1e-6, seed: int = 0) -> list[CheckResult]:
    """Every oracle sweep at acceptance size."""
    sweep = dual_sweep(10_000, seed)
    results = [check_dual_agreement(sweep, tolerance), check_kkt(sweep),
               check_edt(50, seed), check_eikonal(20, seed),
               check_soft_qp(200, seed), check_soft_feasible(1000, seed), check_soft_symmetric(),
               check_admissibility_suite()]
    median = filter_latency(sweep.instances)
    results.append(CheckResult("filter latency (informational)", True,
                               f"median apply_filter {median * 1e6:.2f} us over {len(sweep.instances)} calls"))
    return results
