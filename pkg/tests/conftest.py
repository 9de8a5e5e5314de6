import networkx as nx
import numpy as np
import pytest

from dwls.harness import NoiseModel, build_network, random_measurements
from dwls.network import JointMeasurement, SelfMeasurement, SensorNetwork


def scalar_network(edges, n, z_self=None, z_joint=None):
    """All-scalar network with C = R = 1 everywhere."""
    z_self = z_self or {i: 0.0 for i in range(1, n + 1)}
    z_joint = z_joint or {}
    meas = {i: SelfMeasurement([[1.0]], [[1.0]], [z_self[i]]) for i in range(1, n + 1)}
    js = [JointMeasurement(i, j, [[1.0]], [[1.0]], [[1.0]], [z_joint.get((i, j), 0.0)])
          for i, j in edges]
    return SensorNetwork({i: 1 for i in range(1, n + 1)}, meas, js)


def graph_network(g, seed=0, uniform=False):
    rng = np.random.default_rng(seed)
    if uniform:
        return build_network(g, NoiseModel(), rng)
    return random_measurements(g, rng)


@pytest.fixture
def chain2():
    a, b, c = 0.7, -1.3, 0.4
    net = scalar_network([(1, 2)], 2, {1: a, 2: b}, {(1, 2): c})
    return net, (a, b, c)


@pytest.fixture
def triangle():
    return graph_network(nx.cycle_graph(3), seed=1)


@pytest.fixture
def ring4():
    return graph_network(nx.cycle_graph(4), seed=2)


@pytest.fixture
def path5():
    return graph_network(nx.path_graph(5), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
