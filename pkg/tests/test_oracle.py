import networkx as nx
import numpy as np
import pytest

from dwls import oracle
from dwls.checks import random_loopy_graph, random_tridiagonal, rel_err
from dwls.engine import run
from dwls.harness import random_measurements
from dwls.network import SelfMeasurement, SensorNetwork, loop_free_depth
from dwls.oracle import GlobalSystem

from conftest import graph_network


def dense_wls(net):
    """Textbook oracle straight from the stacked system."""
    g = GlobalSystem.assemble(net)
    W = np.linalg.inv(g.R)
    info = g.H.T @ W @ g.H
    return np.linalg.solve(info, g.H.T @ W @ g.z), np.linalg.inv(info)


class TestSolve:
    def test_isolated(self):
        C = np.array([[1.0], [2.0]])
        R = np.diag([1.0, 4.0])
        net = SensorNetwork({1: 1}, {1: SelfMeasurement(C, R, [1.0, 3.0])})
        # (1 + 1) x = 1 + 2*3/4
        assert oracle.solve(net).x[0] == pytest.approx(2.5 / 2)

    def test_scalar_chain(self, chain2):
        net, (a, b, c) = chain2
        sol = oracle.solve(net)
        np.testing.assert_allclose(sol.x, [(2 * a - b + c) / 3, (2 * b - a + c) / 3])

    def test_matches_stacked_oracle(self, rng):
        net = random_measurements(random_loopy_graph(rng, 9, 3), rng)
        x, cov = dense_wls(net)
        sol = oracle.solve(net)
        np.testing.assert_allclose(sol.x, x, rtol=1e-10)
        np.testing.assert_allclose(sol.cov, cov, rtol=1e-10, atol=1e-14)

    def test_row_order(self, triangle):
        g = GlobalSystem.assemble(triangle)
        n_self = sum(triangle.measurement(i).dim for i in triangle.nodes)
        e = triangle.edge(1, 2)
        rows = oracle.edge_rows(triangle, 1, 2)
        assert rows.start == n_self
        np.testing.assert_array_equal(g.H[rows, g.offsets[1]], e.C_ij)

    def test_information_additivity(self, rng):
        net = random_measurements(random_loopy_graph(rng, 9, 3), rng)
        g = GlobalSystem.assemble(net)
        J, h, _ = oracle.information(net)
        np.testing.assert_allclose(J, g.H.T @ np.linalg.solve(g.R, g.H), rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(h, g.H.T @ np.linalg.solve(g.R, g.z), rtol=1e-12, atol=1e-12)

    def test_sparse_path_agrees(self, monkeypatch):
        net = graph_network(nx.grid_2d_graph(4, 4), seed=5, uniform=True)
        dense = oracle.solve(net)
        monkeypatch.setattr(oracle, "SPARSE_THRESHOLD", 10)
        sparse = oracle.solve(net)
        np.testing.assert_allclose(sparse.x, dense.x, rtol=1e-10)
        np.testing.assert_allclose(sparse.cov, dense.cov, rtol=1e-10)

    def test_singular(self):
        net = SensorNetwork({1: 1}, {1: SelfMeasurement([[0.0]], [[1.0]], [0.0])})
        with pytest.raises(np.linalg.LinAlgError):
            oracle.solve(net)


class TestRestricted:
    def test_radius_zero(self, triangle):
        m = triangle.measurement(1)
        want = np.linalg.solve(m.C.T @ np.linalg.solve(m.R, m.C), m.C.T @ np.linalg.solve(m.R, m.z))
        np.testing.assert_allclose(oracle.solve_restricted(triangle, 1, 0)[0], want, rtol=1e-12)

    def test_full_radius(self, ring4):
        x, S = oracle.solve_restricted(ring4, 1, 2)
        np.testing.assert_allclose(x, oracle.solve(ring4).x_of(1), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(6))
    def test_equals_engine_within_depth(self, seed):
        rng = np.random.default_rng(seed)
        net = random_measurements(random_loopy_graph(rng, 14, 1), rng)
        l1 = loop_free_depth(net, 1)
        traj = run(net, rounds=l1 + 1)
        for r in range(l1 + 1):
            x, S = oracle.solve_restricted(net, 1, r)
            assert rel_err(traj.belief(r + 1, 1).x_hat, x) < 1e-9
            assert rel_err(traj.belief(r + 1, 1).Sigma, S) < 1e-9

    def test_negative_radius(self, ring4):
        with pytest.raises(ValueError):
            oracle.solve_restricted(ring4, 1, -1)


class TestSolveLine:
    def test_cross_check_detects_nothing_on_valid_input(self, rng):
        from dwls.transforms import layered_line
        net = random_measurements(random_loopy_graph(rng, 8, 2), rng)
        oracle.solve_line(layered_line(net, 3), check=True)

    def test_recursion_equals_dense(self, rng):
        from dwls.linalg import solve_first_block
        for _ in range(20):
            sys_ = random_tridiagonal(rng, int(rng.integers(1, 9)))
            x1, S11 = solve_first_block(sys_)
            x = np.linalg.solve(sys_.dense(), sys_.dense_rhs())
            np.testing.assert_allclose(x1, x[:sys_.sizes[0]], rtol=1e-9, atol=1e-12)
