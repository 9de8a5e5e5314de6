import json
import math

import networkx as nx
import numpy as np
import pytest

from dwls import oracle
from dwls.bounds import covariance_bound, estimate_bound, increment_bounds, network_bounds
from dwls.checks import uniform_network
from dwls.engine import run
from dwls.harness import NoiseModel, build_network, random_measurements
from dwls.network import UNBOUNDED


def uniform(g, seed=0, **kw):
    return build_network(g, NoiseModel(**kw), np.random.default_rng(seed))


@pytest.fixture
def deg4():
    # 4-regular => ubar = 3
    return uniform(nx.random_regular_graph(4, 12, seed=1))


@pytest.fixture
def deg3():
    return uniform(nx.random_regular_graph(3, 12, seed=1))


class TestCovarianceBound:
    def test_uniform_constants_ubar3(self, deg4):
        r = covariance_bound(deg4, 1)
        # by hand: C_ij^T R^-1 C_ij = 16 I, C_i^T R^-1 C_i = 100 I
        assert r.ubar == 3
        assert r.alpha1 == pytest.approx(3 * 16)
        assert r.beta1 == pytest.approx(100)
        assert r.alpha2 == pytest.approx(0.0016)
        assert r.beta2 == pytest.approx(0.01)
        lam = 48 / 148 * 0.0016 / 0.0116
        assert r.lambda_ == pytest.approx(lam)
        assert r.rho == pytest.approx(lam * math.sqrt(3))
        dbar = math.sqrt(4 * 3) * math.log(1 + 4 * 16 / 100)
        assert r.delta_bar == pytest.approx(dbar)
        assert r.varpi_cov == pytest.approx(math.expm1(dbar) / 100)
        assert r.applicable and r.bound == pytest.approx(r.varpi_cov * r.rho ** r.l1)

    def test_decoupled(self):
        net = uniform(nx.cycle_graph(5), c_joint=0.0)
        r = covariance_bound(net, 1)
        assert r.alpha1 == 0 and r.alpha2 == 0 and r.rho == 0
        assert r.applicable

    def test_acyclic_is_exact(self, path5):
        r = covariance_bound(path5, 1)
        assert r.l1 is UNBOUNDED and r.exact and r.bound == 0.0

    def test_single_edge_ubar_zero(self, chain2):
        r = covariance_bound(chain2[0], 1)
        assert r.ubar == 0 and r.rho == 0 and r.exact

    def test_not_applicable(self):
        # strong joint coupling, weak self information
        net = uniform(nx.complete_graph(5), c_self=0.2, c_joint=2.0)
        r = covariance_bound(net, 1)
        assert r.rho >= 1 and not r.applicable and "rho" in r.reason

    def test_json_names(self, deg4):
        d = json.loads(covariance_bound(deg4, 1).to_json())
        for k in ("alpha1", "beta1", "alpha2", "beta2", "lambda", "rho", "delta_bar",
                  "varpi_explicit", "l1", "bound", "applicable"):
            assert k in d

    @pytest.mark.parametrize("seed", range(5))
    def test_bound_holds(self, seed):
        net = uniform_network(np.random.default_rng(seed), degree=4)
        r = covariance_bound(net, 1)
        assert r.applicable
        traj = run(net, rounds=r.l1 + 6)
        cov = oracle.solve(net).cov_of(1)
        for N in range(r.l1 + 1, r.l1 + 7):
            assert np.linalg.norm(cov - traj.belief(N, 1).Sigma, 2) <= r.bound


class TestEstimateBound:
    def test_uniform_constants_ubar2(self, deg3):
        r = estimate_bound(deg3, 1)
        assert (r.eps_under, r.r_under, r.r_over) == pytest.approx((1.0, 0.01, 0.01))
        assert r.eps_over == pytest.approx(math.sqrt(1 + 4 * 2 * 0.16))
        assert r.a1 == pytest.approx(2 * 0.16 / 0.01)
        assert r.a2 == pytest.approx(0.16 * 2 * 0.01)
        assert (r.b1, r.b2) == pytest.approx((100.0, 0.01))
        omega = 32 / 132 * 0.0032 / 0.0132
        assert r.omega == pytest.approx(omega)
        assert (r.q_over, r.q_under) == pytest.approx((228.0, 100.0))
        iota = (math.sqrt(228) - 10) / (math.sqrt(228) + 10)
        assert r.iota == pytest.approx(iota)
        zeta = 2 + math.log(2.28) / math.log(1 / math.sqrt(omega))
        assert r.zeta == pytest.approx(zeta)
        assert r.kappa == pytest.approx(max(2 * math.sqrt(omega), math.sqrt(2) * iota ** (1 / zeta)))
        assert r.c == pytest.approx((228 - 100) / (2 * 228 * 100 * iota))
        assert r.applicable and r.kappa < 1

    def test_ubar3_kappa_not_below_one(self, deg4):
        r = estimate_bound(deg4, 1)
        assert r.kappa > 1 and not r.applicable

    def test_uniform_model_values(self, deg4):
        r = estimate_bound(deg4, 1)
        assert r.eps_under == pytest.approx(1.0) and r.r_under == pytest.approx(0.01)

    def test_decoupled_is_degenerate(self):
        net = uniform(nx.cycle_graph(5), c_joint=0.0)
        r = estimate_bound(net, 1)
        assert r.omega == 0 and not r.applicable and "omega" in r.reason

    def test_dominance(self, deg3, deg4, rng):
        nets = [deg3, deg4, random_measurements(nx.cycle_graph(6), rng)]
        for net in nets:
            cov, est = network_bounds(net, [1])[1]
            assert est.a1 >= cov.alpha1 * (1 - 1e-12)
            assert est.a2 >= cov.alpha2 * (1 - 1e-12)
            assert est.b1 <= cov.beta1 * (1 + 1e-12)
            assert est.b2 <= cov.beta2 * (1 + 1e-12)
            assert est.omega >= cov.lambda_ * (1 - 1e-12)
            if math.isfinite(est.kappa_check) and math.isfinite(est.kappa):
                assert est.kappa_check <= est.kappa + 1e-12
                assert est.kappa >= cov.rho - 1e-12

    def test_requires_sampled(self):
        from dwls.network import SelfMeasurement, SensorNetwork
        net = SensorNetwork({1: 1}, {1: SelfMeasurement([[1.0]], [[1.0]])})
        with pytest.raises(ValueError, match="sampled"):
            estimate_bound(net, 1)

    def test_pure(self, deg3):
        assert estimate_bound(deg3, 2).to_dict() == estimate_bound(deg3, 2).to_dict()

    @pytest.mark.parametrize("seed", range(5))
    def test_bound_holds(self, seed):
        net = uniform_network(np.random.default_rng(seed))
        r = estimate_bound(net, 1)
        assert r.applicable
        traj = run(net, rounds=r.l1 + 8)
        x = oracle.solve(net).x_of(1)
        for N in range(r.l1 + 1, r.l1 + 9):
            assert np.linalg.norm(x - traj.belief(N, 1).x_hat) <= r.bound


class TestIncrements:
    def test_restricted_cut_after_r1(self, deg3):
        inc = increment_bounds(deg3, 1, 20)
        r1 = estimate_bound(deg3, 1).r1
        assert np.all(inc.restricted[r1:] == 0)
        assert np.all(inc.restricted[:r1] > 0)

    def test_decoupled_zero(self):
        net = uniform(nx.cycle_graph(5), c_joint=0.0)
        inc = increment_bounds(net, 1, 6)
        assert np.all(inc.dwls == 0) and np.all(inc.restricted == 0)
        traj = run(net, rounds=6)
        for N in range(1, 6):
            assert np.allclose(traj.belief(N + 1, 1).x_hat, traj.belief(N, 1).x_hat)

    @pytest.mark.parametrize("seed", range(3))
    def test_measured_increments(self, seed):
        net = uniform_network(np.random.default_rng(seed))
        inc = increment_bounds(net, 1, 12)
        assert inc.applicable
        traj = run(net, rounds=13)
        for N in range(1, 13):
            d = np.linalg.norm(traj.belief(N + 1, 1).x_hat - traj.belief(N, 1).x_hat)
            assert d <= inc.dwls[N - 1]
        for N in range(1, 12):
            a, _ = oracle.solve_restricted(net, 1, N)
            b, _ = oracle.solve_restricted(net, 1, N - 1)
            assert np.linalg.norm(a - b) <= inc.restricted[N - 1] + 1e-12
