import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dualcbf.barrier import BarrierSpec, HalfspaceConstraint, build_constraint
from dualcbf.filter import (DEFAULT_FRONTIER, DEFAULT_OBSTACLE, DegenerateConstraintError, FilterCase,
                            FilterParams, ParallelConstraintsError, apply_filter, gram_determinant,
                            project_dual, project_single, soft_residual, solve_soft, speed_ceiling,
                            verify_kkt)
from dualcbf.grid import SdfSample
from dualcbf.oracle import dykstra_project, soft_qp_grid_search
from dualcbf.verification import parallel_infeasible_instances, random_dual_instances


def hs(g, b):
    return HalfspaceConstraint(np.array(g, dtype=float), float(b))


def at(value, gradient):
    return SdfSample(value, np.array(gradient, dtype=float), False, 1.0)


# single projection

def test_project_single_examples():
    np.testing.assert_array_equal(project_single((0, 0), hs((1, 0), 0.5)), [0.5, 0.0])
    np.testing.assert_array_equal(project_single((1, 1), hs((1, 0), 0.0)), [1.0, 1.0])
    u = project_single((0.2, -0.4), hs((0.6, 0.8), 0.3))
    np.testing.assert_allclose(u, [0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(u, dykstra_project((0.2, -0.4), [hs((0.6, 0.8), 0.3)]), atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 2), st.floats(0, 2 * math.pi), st.floats(-1, 1))
def test_project_single_lands_on_boundary(ux, uy, norm, ang, b):
    c = hs((norm * math.cos(ang), norm * math.sin(ang)), b)
    u = project_single((ux, uy), c)
    if c.slack((ux, uy)) < 0:
        assert abs(c.slack(u)) <= 1e-12
    else:
        assert tuple(u) == (ux, uy)


def test_project_single_rejects_degenerate():
    with pytest.raises(DegenerateConstraintError):
        project_single((0, 0), HalfspaceConstraint(np.zeros(2), 1.0, degenerate=True))


# dual projection

def test_project_dual_orthogonal():
    c1, c2 = hs((1, 0), 1), hs((0, 1), 1)
    res = project_dual((0, 0), c1, c2)
    np.testing.assert_array_equal(res.u, [1.0, 1.0])
    assert res.case is FilterCase.DUAL and res.lambda1 == 1.0 and res.lambda2 == 1.0
    assert verify_kkt((0, 0), c1, c2, res).ok
    assert not verify_kkt((0, 0), c1, c2, (res.u, res.lambda1 + 0.1, res.lambda2)).stationarity


def test_project_dual_single_cases():
    res = project_dual((0, 0), hs((1, 0), 0.5), hs((0, 1), -10))
    np.testing.assert_array_equal(res.u, [0.5, 0.0])
    assert res.case is FilterCase.SINGLE_OBSTACLE
    res = project_dual((0, 0), hs((1, 0), -10), hs((0, 1), 0.5))
    assert res.case is FilterCase.SINGLE_FRONTIER and res.lambda1 == 0.0
    res = project_dual((3, 3), hs((1, 0), 0.5), hs((0, 1), 0.5))
    assert res.case is FilterCase.NOMINAL and tuple(res.u) == (3.0, 3.0)


def test_project_dual_rejects_parallel_and_degenerate():
    with pytest.raises(ParallelConstraintsError):
        project_dual((0, 0), hs((1, 0), 1), hs((-2, 1e-9), 1))
    with pytest.raises(DegenerateConstraintError):
        project_dual((0, 0), hs((1, 0), 1), HalfspaceConstraint(np.zeros(2), 1.0, degenerate=True))


def test_random_sweep_matches_dykstra_and_kkt():
    inst = random_dual_instances(1000, seed=7)
    for k in range(len(inst)):
        c1, c2 = inst.constraints(k)
        res = project_dual(inst.u_des[k], c1, c2)
        ref = dykstra_project(inst.u_des[k], [c1, c2])
        assert np.max(np.abs(res.u - ref)) <= 1e-6
        assert verify_kkt(inst.u_des[k], c1, c2, res).ok
        assert c1.slack(res.u) >= -1e-9 and c2.slack(res.u) >= -1e-9


@pytest.mark.parametrize("seed", range(5))
def test_minimality_against_disc_samples(seed):
    inst = random_dual_instances(20, seed=seed)
    rng = np.random.default_rng(seed)
    for k in range(len(inst)):
        c1, c2 = inst.constraints(k)
        u = project_dual(inst.u_des[k], c1, c2).u
        best = np.linalg.norm(u - inst.u_des[k])
        ang = rng.uniform(0, 2 * np.pi, 10_000)
        rad = 0.5 * np.sqrt(rng.uniform(0, 1, 10_000))
        pts = u + np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        feas = (pts @ c1.g >= c1.b) & (pts @ c2.g >= c2.b)
        dist = np.linalg.norm(pts[feas] - inst.u_des[k], axis=1)
        assert dist.size == 0 or dist.min() >= best - 1e-7


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 2), st.floats(0.1, 2), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_gram_determinant_identity(n1, n2, a1, a2):
    g1 = np.array([n1 * math.cos(a1), n1 * math.sin(a1)])
    g2 = np.array([n2 * math.cos(a2), n2 * math.sin(a2)])
    det = gram_determinant(hs(g1, 0), hs(g2, 0))
    assert det == pytest.approx(math.sin(a2 - a1) ** 2 * n1 ** 2 * n2 ** 2, abs=1e-12)


# soft QP

def test_soft_symmetric_case_exact():
    u, delta = solve_soft((0, 0), hs((1, 0), 1), hs((-1, 0), 1), FilterParams(penalty=10))
    assert tuple(u) == (0.0, 0.0) and delta == 1.0


def test_soft_asymmetric_matches_grid_search():
    c1, c2 = hs((1, 0), 0.8), hs((-1, 0), 0.4)
    u, delta = solve_soft((0.1, 0), c1, c2, FilterParams(penalty=5))
    u_ref, d_ref = soft_qp_grid_search((0.1, 0), c1, c2, 5.0)
    assert np.max(np.abs(u - u_ref)) <= 1e-3 and abs(delta - d_ref) <= 1e-3
    assert delta > 0 and c1.slack(u) >= -delta - 1e-9 and c2.slack(u) >= -delta - 1e-9


def test_soft_feasible_input_has_zero_slack():
    inst = random_dual_instances(200, seed=3)
    for k in range(len(inst)):
        c1, c2 = inst.constraints(k)
        u, delta = solve_soft(inst.u_des[k], c1, c2)
        assert delta == 0.0
        np.testing.assert_array_equal(u, project_dual(inst.u_des[k], c1, c2).u)


def test_soft_parallel_feasible_cases():
    # same direction: the tighter constraint wins
    u, delta = solve_soft((0, 0), hs((1, 0), 0.5), hs((2, 0), 0.4))
    assert delta == 0.0 and u[0] == pytest.approx(0.5)
    # opposite directions with a nonempty slab 0.2 <= x <= 0.6
    u, delta = solve_soft((1.0, 0.3), hs((1, 0), 0.2), hs((-1, 0), -0.6))
    assert delta == 0.0 and u[0] == pytest.approx(0.6) and u[1] == pytest.approx(0.3)


def test_soft_residual_monotone_on_bracket():
    for u_des, c1, c2, p in parallel_infeasible_instances(30, seed=4):
        params = FilterParams(penalty=p)
        hi = max(0.0, c1.b - c1.g @ u_des, c2.b - c2.g @ u_des) + 1e-6
        vals = [soft_residual(d, u_des, c1, c2, params) for d in np.linspace(0, hi, 200)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("k", range(10))
def test_soft_matches_grid_oracle(k):
    u_des, c1, c2, p = parallel_infeasible_instances(10, seed=99)[k]
    u, delta = solve_soft(u_des, c1, c2, FilterParams(penalty=p))
    u_ref, d_ref = soft_qp_grid_search(u_des, c1, c2, p)
    assert np.max(np.abs(u - u_ref)) <= 1e-3 and abs(delta - d_ref) <= 1e-3


# speed ceiling

def test_speed_ceiling():
    np.testing.assert_array_equal(speed_ceiling((0.1, 0), 0.2), [0.1, 0])
    np.testing.assert_allclose(speed_ceiling((0.3, 0.4), 0.2), [0.12, 0.16], atol=1e-15)
    np.testing.assert_array_equal(speed_ceiling((0, 0), 0.2), [0, 0])
    with pytest.raises(ValueError):
        speed_ceiling((1, 0), 0.0)


# orchestration

def test_apply_filter_interior_is_nominal():
    res = apply_filter((0.1, 0), at(3.0, (1, 0)), at(3.0, (0, 1)), 0.0)
    assert res.case is FilterCase.NOMINAL
    np.testing.assert_array_equal(res.u_safe, [0.1, 0.0])
    assert res.intervention_magnitude == 0.0 and not res.intervened()
    assert res.h1 > 0.99 and res.h2 > 0.99 and res.gamma2 == 1.0 and res.slack == 0.0


def test_apply_filter_obstacle_only_branch():
    res = apply_filter((-0.2, 0), at(0.3, (1, 0)))
    assert res.case is FilterCase.OBSTACLE_ONLY and res.h2 is None and res.gamma2 is None
    c1 = build_constraint(DEFAULT_OBSTACLE, at(0.3, (1, 0)))
    assert not res.speed_clipped and res.lambda1 > 0
    assert abs(c1.slack(res.u_safe)) <= 1e-12
    np.testing.assert_allclose(res.u_safe, project_single((-0.2, 0), c1))
    with pytest.raises(ValueError):
        apply_filter((0, 0), at(1.0, (1, 0)), at(1.0, (1, 0)), None)


def test_apply_filter_soft_fallback_between_obstacle_and_frontier():
    # obstacle on the left (gradient +x), unknown space on the right (gradient -x), both violated
    obs, front = at(0.2, (1, 0)), at(0.2, (-1, 0))
    res = apply_filter((0.0, 0.0), obs, front, 0.5)
    assert res.case is FilterCase.SOFT_FALLBACK and res.slack > 0
    c1 = build_constraint(DEFAULT_OBSTACLE, obs)
    c2 = build_constraint(DEFAULT_FRONTIER, front, gain=res.gamma2)
    u_ref, d_ref = soft_qp_grid_search((0.0, 0.0), c1, c2, 50.0)
    assert np.max(np.abs(res.u_safe - u_ref)) <= 1e-3 and abs(res.slack - d_ref) <= 1e-3


def test_apply_filter_fail_safe_stop():
    spec = BarrierSpec(40.0, 0.35, 1.5)  # saturates within a few centimetres
    res = apply_filter((0.1, 0.1), at(-0.5, (1, 0)), obstacle_spec=spec)
    assert res.case is FilterCase.FAIL_SAFE_STOP
    np.testing.assert_array_equal(res.u_safe, [0, 0])
    res = apply_filter((0.1, 0.1), at(1.0, (1, 0)), at(-0.5, (1, 0)), 0.2, frontier_spec=spec)
    assert res.case is FilterCase.FAIL_SAFE_STOP
    # saturated but satisfied: no stop
    res = apply_filter((0.1, 0.1), at(5.0, (1, 0)), obstacle_spec=spec)
    assert res.case is FilterCase.OBSTACLE_ONLY
    np.testing.assert_array_equal(res.u_safe, [0.1, 0.1])


def test_apply_filter_speed_clip_is_separate_from_intervention():
    res = apply_filter((0.3, 0.4), at(3.0, (1, 0)), at(3.0, (0, 1)), 0.0)
    assert res.speed_clipped and not res.intervened()
    assert np.linalg.norm(res.u_safe) == pytest.approx(0.2)


@settings(max_examples=300, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.2, 2), st.floats(0, 2 * math.pi),
       st.floats(-0.2, 2), st.floats(0, 2 * math.pi), st.floats(0, 1))
def test_forward_invariance_certificate(ux, uy, p1, a1, p2, a2, rho):
    obs = at(p1, (math.cos(a1), math.sin(a1)))
    front = at(p2, (math.cos(a2), math.sin(a2)))
    res = apply_filter((ux, uy), obs, front, rho)
    assert np.linalg.norm(res.u_safe) <= 0.2 * (1 + 1e-12)
    assert 0.2 <= res.gamma2 <= 1.0
    if res.case in (FilterCase.SOFT_FALLBACK, FilterCase.FAIL_SAFE_STOP) or res.speed_clipped:
        return
    c1 = build_constraint(DEFAULT_OBSTACLE, obs)
    c2 = build_constraint(DEFAULT_FRONTIER, front, gain=res.gamma2)
    assert c1.slack(res.u_safe) >= -1e-9 and c2.slack(res.u_safe) >= -1e-9
    if res.case is FilterCase.DUAL:
        assert res.lambda1 >= 0 and res.lambda2 >= 0
    assert res.slack == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.15, 0.15), st.floats(-0.15, 0.15), st.floats(0, 2), st.floats(0, 2 * math.pi),
       st.floats(0, 2), st.floats(0, 2 * math.pi), st.floats(0, 1))
def test_idempotence(ux, uy, p1, a1, p2, a2, rho):
    obs = at(p1, (math.cos(a1), math.sin(a1)))
    front = at(p2, (math.cos(a2), math.sin(a2)))
    first = apply_filter((ux, uy), obs, front, rho)
    if first.case in (FilterCase.SOFT_FALLBACK, FilterCase.FAIL_SAFE_STOP) or first.speed_clipped:
        return
    second = apply_filter(first.u_safe, obs, front, rho)
    np.testing.assert_allclose(second.u_safe, first.u_safe, atol=1e-12)
    assert not second.intervened()


def test_filter_params_invariants():
    for kwargs in (dict(penalty=0), dict(v_max=-1), dict(parallel_tol=0), dict(degenerate_tol=0),
                   dict(bisection_iters=0), dict(bisection_iters=2.5), dict(intervention_tol=-1)):
        with pytest.raises(ValueError):
            FilterParams(**kwargs)
