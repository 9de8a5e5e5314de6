import networkx as nx
import numpy as np
import pytest

from dwls import oracle
from dwls.checks import random_loopy_graph, rel_err
from dwls.engine import run
from dwls.harness import random_measurements
from dwls.linalg import band_recursion, is_psd
from dwls.network import graph_stats
from dwls.transforms import TreeOverflowError, collapse_to_line, layered_line, unroll

from conftest import graph_network


def tree_as_nx(tree):
    g = nx.Graph()
    g.add_nodes_from(n.id for n in tree.nodes)
    g.add_edges_from((n.parent, n.id) for n in tree.nodes[1:])
    return g


class TestUnroll:
    def test_triangle_layers(self, triangle):
        tree = unroll(triangle, 1, 3)
        assert [len(l) for l in tree.layers()] == [1, 2, 2]
        origins = [[tree.nodes[k].origin for k in l] for l in tree.layers()]
        # node 2 spawns a copy of 3 and node 3 a copy of 2
        assert origins == [[1], [2, 3], [3, 2]]

    def test_ring4_depth2(self, ring4):
        assert unroll(ring4, 1, 2).n_nodes == 3

    def test_is_a_tree(self, rng):
        net = random_measurements(random_loopy_graph(rng, 8, 3), rng)
        tree = unroll(net, 1, 5)
        assert nx.is_tree(tree_as_nx(tree))

    def test_no_backtracking(self, rng):
        net = random_measurements(random_loopy_graph(rng, 8, 3), rng)
        tree = unroll(net, 2, 5)
        for n in tree.nodes[1:]:
            p = tree.nodes[n.parent]
            assert net.has_edge(p.origin, n.origin)
            if p.parent is not None:
                assert n.origin != tree.nodes[p.parent].origin

    def test_tree_input_is_isomorphic(self, path5):
        tree = unroll(path5, 2, 10)
        g = nx.path_graph(5)
        assert nx.is_isomorphic(tree_as_nx(tree), g)
        assert sorted(n.origin for n in tree.nodes) == path5.nodes

    def test_layer_growth_bound(self, rng):
        net = random_measurements(random_loopy_graph(rng, 10, 4), rng)
        ubar = graph_stats(net).ubar
        for n, layer in enumerate(unroll(net, 1, 7).layers(), start=1):
            assert len(layer) <= (ubar + 1) * ubar ** (n - 1)

    def test_overflow(self):
        net = graph_network(nx.complete_graph(5))
        with pytest.raises(TreeOverflowError):
            unroll(net, 1, 12, max_nodes=1000)

    def test_dot(self, triangle):
        dot = unroll(triangle, 1, 2).to_dot()
        assert dot.startswith("graph") and "t0 -- t1" in dot


class TestCollapse:
    def test_single_node(self, triangle):
        line = collapse_to_line(unroll(triangle, 1, 1))
        assert line.n_layers == 1
        np.testing.assert_array_equal(line.C_self[0], triangle.measurement(1).C)

    def test_chain_is_itself(self, chain2):
        net = chain2[0]
        line = collapse_to_line(unroll(net, 1, 2))
        x, S = oracle.solve_line(line)
        ref = oracle.solve(net)
        np.testing.assert_allclose(x, ref.x_of(1), rtol=1e-12)

    def test_grave_acute_structure(self, rng):
        net = random_measurements(random_loopy_graph(rng, 7, 2), rng)
        tree = unroll(net, 1, 3)
        line = collapse_to_line(tree)
        layers = tree.layers()
        # C_up is block-diagonal over children; C_down stacks each parent's child coefficients
        row = 0
        for c in layers[1]:
            e = tree.joint_measurement(c)
            assert np.count_nonzero(line.C_down[0][row:row + e.dim]) == np.count_nonzero(e.coef(tree.nodes[0].origin))
            row += e.dim
        assert row == line.C_down[0].shape[0]

    @pytest.mark.parametrize("N", [1, 2, 3, 4])
    def test_triangle_matches_engine(self, triangle, N):
        traj = run(triangle, rounds=N)
        x, S = oracle.solve_line(collapse_to_line(unroll(triangle, 1, N)))
        np.testing.assert_allclose(x, traj.belief(N, 1).x_hat, rtol=1e-10)
        np.testing.assert_allclose(S, traj.belief(N, 1).Sigma, rtol=1e-10)

    def test_tree_network_roundtrip(self, rng):
        net = random_measurements(random_loopy_graph(rng, 6, 2), rng)
        tree = unroll(net, 1, 4)
        x, _ = oracle.solve_line(collapse_to_line(tree))
        assert rel_err(x, oracle.solve(tree.to_network()).x_of(1)) < 1e-10


class TestLayeredLine:
    def test_path_is_itself(self, path5):
        line = layered_line(path5, 1)
        assert line.members == ((1,), (2,), (3,), (4,), (5,))

    def test_triangle_folds_edge(self, triangle):
        line = layered_line(triangle, 1)
        assert line.members == ((1,), (2, 3))
        e = triangle.edge(2, 3)
        # layer-2 own block = two self rows + the (2,3) joint rows
        assert line.C_self[1].shape[0] == triangle.measurement(2).dim + triangle.measurement(3).dim + e.dim
        x, S = oracle.solve_line(line)
        np.testing.assert_allclose(x, oracle.solve(triangle).x_of(1), rtol=1e-10)

    @pytest.mark.parametrize("seed", range(6))
    def test_equals_global_solve(self, seed):
        rng = np.random.default_rng(seed)
        net = random_measurements(random_loopy_graph(rng, 10, 4), rng)
        for root in (1, 5):
            x, S = oracle.solve_line(layered_line(net, root))
            ref = oracle.solve(net)
            assert rel_err(x, ref.x_of(root)) < 1e-9
            assert rel_err(S, ref.cov_of(root)) < 1e-9

    @pytest.mark.parametrize("seed", range(4))
    def test_truncation_is_restricted_solve(self, seed):
        rng = np.random.default_rng(seed)
        net = random_measurements(random_loopy_graph(rng, 10, 3), rng)
        line = layered_line(net, 1)
        for k in range(1, line.n_layers + 1):
            x, _ = oracle.solve_line(line.truncate(k))
            xr, _ = oracle.solve_restricted(net, 1, k - 1)
            assert rel_err(x, xr) < 1e-9

    def test_tree_graph_matches_unrolled_line(self, path5):
        a, _ = oracle.solve_line(layered_line(path5, 2))
        b, _ = oracle.solve_line(collapse_to_line(unroll(path5, 2, 6)))
        np.testing.assert_allclose(a, b, rtol=1e-10)


class TestSpectralConstants:
    @pytest.mark.parametrize("seed", range(4))
    def test_bounds_hold(self, seed):
        rng = np.random.default_rng(seed)
        net = random_measurements(random_loopy_graph(rng, 8, 3), rng)
        for line in (collapse_to_line(unroll(net, 1, 4)), layered_line(net, 1)):
            k = line.spectral_constants()
            A, S, _ = line.stacked()
            AtA = A.T @ A
            n = AtA.shape[0]
            assert is_psd(AtA - k["eps_under"] ** 2 * np.eye(n))
            assert is_psd(k["eps_over"] ** 2 * np.eye(n) - AtA)
            sys_ = line.normal_equations()
            Q = sys_.dense()
            np.testing.assert_allclose(Q, A.T @ np.linalg.solve(S, A), rtol=1e-10, atol=1e-12)
            lo, hi = k["q_under"], k["q_over"]
            assert is_psd(Q - lo * np.eye(n)) and is_psd(hi * np.eye(n) - Q)
            rec = band_recursion(sys_)
            for M in (*rec.deltas, *rec.gammas, *rec.phis):
                m = M.shape[0]
                assert is_psd(M - lo * np.eye(m)) and is_psd(hi * np.eye(m) - M)
