import numpy as np
import pytest

from dualcbf.barrier import HalfspaceConstraint
from dualcbf.grid import CellState, OccupancyGrid, SdfKind, compute_obstacle_sdf, parse_grid_text
from dualcbf.oracle import (OracleConfig, OracleConvergenceError, _components, brute_force_sdf,
                            dykstra_batch, dykstra_project, soft_qp_grid_search)


def hs(g, b):
    return HalfspaceConstraint(np.array(g, dtype=float), float(b))


def test_single_halfspace_is_plain_projection():
    u = dykstra_project((0.2, -0.4), [hs((0.6, 0.8), 0.3)])
    np.testing.assert_allclose(u, [0.5, 0.0], atol=1e-10)


def test_orthogonal_pair():
    np.testing.assert_allclose(dykstra_project((0, 0), [hs((1, 0), 1), hs((0, 1), 1)]), [1, 1], atol=1e-12)


def test_dykstra_reports_empty_intersection():
    with pytest.raises(OracleConvergenceError):
        dykstra_project((0, 0), [hs((1, 0), 1), hs((-1, 0), 1)], OracleConfig(dykstra_iters=200))


def test_dykstra_batch_freezing_matches_unfrozen_iterates():
    rng = np.random.default_rng(0)
    n = 50
    u = rng.uniform(-1, 1, (n, 2))
    g1, g2 = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
    b1, b2 = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
    x_frozen, _ = dykstra_batch(u, [g1, g2], [b1, b2], 5000)
    x_full, _ = dykstra_batch(u, [g1, g2], [b1, b2], 5000, stop_when_fixed=False)
    np.testing.assert_array_equal(x_frozen, x_full)


def test_grid_search_symmetric_and_feasible():
    u, d = soft_qp_grid_search((0, 0), hs((1, 0), 1), hs((-1, 0), 1), 10.0)
    assert d == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(u, [0, 0], atol=1e-6)
    u, d = soft_qp_grid_search((0.3, 0.1), hs((1, 0), 0.1), hs((0, 1), 0.0), 10.0)
    assert d == 0.0
    np.testing.assert_allclose(u, [0.3, 0.1])


def test_grid_search_asymmetric_analytic():
    # g1=(1,0) b1=0.8, g2=(-1,0) b2=0.4, u_des=(0.1,0), p=5:
    # with both relaxed constraints active, 0.8 - d <= x <= d - 0.4 forces d >= 0.6 and x = 0.2 at d = 0.6;
    # cost 0.5 (x - 0.1)^2 + 2.5 d^2 is minimized on that boundary at d = 0.6 exactly
    u, d = soft_qp_grid_search((0.1, 0), hs((1, 0), 0.8), hs((-1, 0), 0.4), 5.0)
    assert d == pytest.approx(0.6, abs=1e-4)
    np.testing.assert_allclose(u, [0.2, 0.0], atol=1e-4)


def test_oracle_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(dykstra_iters=0)
    with pytest.raises(ValueError):
        OracleConfig(grid_search_step=0)


def test_brute_force_small_cases():
    g = parse_grid_text("3 3 1\n...\n.#.\n...\n")
    np.testing.assert_array_equal(brute_force_sdf(g).values, compute_obstacle_sdf(g).values)
    free = OccupancyGrid.filled(4, 4, 0.5, CellState.FREE)
    assert np.all(brute_force_sdf(free).values == 0.5 * np.sqrt(18))
    assert brute_force_sdf(free, SdfKind.FRONTIER) is None
    with pytest.raises(ValueError):
        brute_force_sdf(OccupancyGrid.filled(65, 64, 1.0, CellState.FREE))


def test_bfs_components_are_eight_connected():
    mask = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 0], [1, 1, 0]], dtype=bool)
    comps = _components(mask)
    assert sorted(len(c) for c in comps) == [2, 2]
