"""Experiment driver: seeded network generators, a block-Jacobi baseline and CSV output."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import networkx as nx
import numpy as np

from . import oracle
from .bounds import network_bounds
from .engine import run
from .network import (
    JointMeasurement,
    SelfMeasurement,
    SensorNetwork,
    Unbounded,
    bfs_distances,
    clamp_depth,
    loop_free_depth,
)

Family = Literal["ring-of-trees", "random-regular", "grid", "tree"]


class GeneratorError(ValueError):
    """The requested topology cannot be built."""


@dataclass(frozen=True)
class NoiseModel:
    """Uniform measurement model: ``z_i = c_self x_i + v``, ``z_ij = c_joint (x_i + x_j) + v``."""

    dim: int = 3
    c_self: float = 1.0
    c_joint: float = 0.4
    r_self: float = 0.01
    r_joint: float = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    nodes: int = 60
    degree: int = 3
    family: Family = "ring-of-trees"
    seed: int = 0
    rounds: int = 20
    probes: Sequence[int] | Literal["all"] = "all"
    noise: NoiseModel = field(default_factory=NoiseModel)
    graph_path: str | None = None
    ring_size: int | None = None


# ----------------------------------------------------------------------------
# Topologies


def _ring_of_trees(n: int, degree: int, rng: np.random.Generator, ring: int | None) -> nx.Graph:
    """A cycle with random trees hanging off it; every degree stays <= ``degree``."""
    if degree < 3:
        raise GeneratorError("ring-of-trees needs degree >= 3 so the ring can carry trees")
    ring = ring or max(3, min(n, 4))
    if not 3 <= ring <= n:
        raise GeneratorError(f"ring size {ring} must lie in [3, {n}]")
    g = nx.cycle_graph(ring)
    for v in range(ring, n):
        open_ = [u for u in g.nodes if g.degree(u) < degree]
        g.add_edge(v, int(rng.choice(open_)))
    return g


def _random_tree(n: int, degree: int, rng: np.random.Generator) -> nx.Graph:
    g = nx.Graph()
    g.add_node(0)
    for v in range(1, n):
        open_ = [u for u in g.nodes if g.degree(u) < degree]
        g.add_edge(v, int(rng.choice(open_)))
    return g


def topology(family: Family, n: int, degree: int, rng: np.random.Generator,
             ring_size: int | None = None) -> nx.Graph:
    """Seeded connected graph on nodes ``0..n-1``."""
    if n < 1:
        raise GeneratorError("need at least one node")
    if family == "ring-of-trees":
        g = _ring_of_trees(n, degree, rng, ring_size)
    elif family == "tree":
        g = _random_tree(n, max(degree, 2), rng)
    elif family == "random-regular":
        if (n * degree) % 2 or degree >= n:
            raise GeneratorError(f"no {degree}-regular graph on {n} nodes")
        for _ in range(100):
            g = nx.random_regular_graph(degree, n, seed=int(rng.integers(2**32)))
            if nx.is_connected(g):
                break
        else:
            raise GeneratorError(f"could not draw a connected {degree}-regular graph")
    elif family == "grid":
        side = math.isqrt(n)
        if side * side != n:
            raise GeneratorError(f"grid needs a square node count, got {n}")
        g = nx.convert_node_labels_to_integers(nx.grid_2d_graph(side, side))
    else:
        raise GeneratorError(f"unknown family {family!r}")
    return g


def build_network(g: nx.Graph, noise: NoiseModel, rng: np.random.Generator) -> SensorNetwork:
    """Attach the uniform measurement model to ``g`` and sample state and noise."""
    d = noise.dim
    eye = np.eye(d)
    nodes = sorted(g.nodes)
    ids = {v: k + 1 for k, v in enumerate(nodes)}
    x = {ids[v]: rng.standard_normal(d) for v in nodes}
    Rs, Rj = noise.r_self * eye, noise.r_joint * eye
    meas = {}
    for v in nodes:
        i = ids[v]
        z = noise.c_self * x[i] + rng.multivariate_normal(np.zeros(d), Rs)
        meas[i] = SelfMeasurement(noise.c_self * eye, Rs, z)
    edges = []
    for u, v in sorted((min(ids[a], ids[b]), max(ids[a], ids[b])) for a, b in g.edges):
        z = noise.c_joint * (x[u] + x[v]) + rng.multivariate_normal(np.zeros(d), Rj)
        edges.append(JointMeasurement(u, v, noise.c_joint * eye, noise.c_joint * eye, Rj, z))
    return SensorNetwork({ids[v]: d for v in nodes}, meas, edges, x)


def generate(config: ExperimentConfig) -> SensorNetwork:
    """Network described by ``config``; the seed fixes topology, state and noise."""
    if config.graph_path:
        return SensorNetwork.load(config.graph_path)
    rng = np.random.default_rng(config.seed)
    g = topology(config.family, config.nodes, config.degree, rng, config.ring_size)
    return build_network(g, config.noise, rng)


def random_measurements(g: nx.Graph, rng: np.random.Generator, dims: Sequence[int] | int = (1, 2, 3),
                        extra_rows: int = 1) -> SensorNetwork:
    """Network on ``g`` with random full-rank coefficients and random SPD noise.

    Node dimensions are drawn from ``dims``; each self measurement has
    ``n_i + randint(0, extra_rows)`` rows, each joint one 1-3 rows.
    """
    choices = [dims] if isinstance(dims, int) else list(dims)
    nodes = sorted(g.nodes)
    ids = {v: k + 1 for k, v in enumerate(nodes)}
    n = {ids[v]: int(rng.choice(choices)) for v in nodes}

    def spd(m):
        A = rng.standard_normal((m, m))
        return A @ A.T / m + 0.2 * np.eye(m)

    x = {i: rng.standard_normal(n[i]) for i in n}
    meas = {}
    for i in sorted(n):
        m = n[i] + int(rng.integers(0, extra_rows + 1))
        C = rng.standard_normal((m, n[i]))
        R = spd(m)
        z = C @ x[i] + rng.multivariate_normal(np.zeros(m), R)
        meas[i] = SelfMeasurement(C, R, z)
    edges = []
    for a, b in g.edges:
        i, j = sorted((ids[a], ids[b]))
        m = int(rng.integers(1, 4))
        Ca = rng.standard_normal((m, n[i]))
        Cb = rng.standard_normal((m, n[j]))
        R = spd(m)
        z = Ca @ x[i] + Cb @ x[j] + rng.multivariate_normal(np.zeros(m), R)
        edges.append(JointMeasurement(i, j, Ca, Cb, R, z))
    return SensorNetwork(n, meas, edges, x)


# ----------------------------------------------------------------------------
# Baseline


def jacobi_baseline(network: SensorNetwork, rounds: int) -> list[np.ndarray]:
    """Block-Jacobi iterates on the global normal equations, starting from zero.

    Element ``k`` of the result is the stacked estimate after ``k + 1`` sweeps.
    """
    J, h, offs = oracle.information(network)
    nodes = network.nodes
    diag_inv = {}
    for i in nodes:
        D = J[offs[i], offs[i]]
        try:
            diag_inv[i] = np.linalg.inv(np.linalg.cholesky(D))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"diagonal block of node {i} is singular") from exc
    x = np.zeros_like(h)
    out = []
    for _ in range(rounds):
        r = h - J @ x
        nxt = x.copy()
        for i in nodes:
            s = offs[i]
            Li = diag_inv[i]
            # x_i <- D_i^{-1} (h_i - sum_{j != i} J_ij x_j)
            nxt[s] = x[s] + Li.T @ (Li @ r[s])
        x = nxt
        out.append(x.copy())
    return out


# ----------------------------------------------------------------------------
# Experiment


@dataclass
class ExperimentResult:
    convergence: list[tuple[int, float, float]]
    depth_cov: list[tuple[int, int | str, float, float, bool]]
    depth_est: list[tuple[int, int | str, float, float, bool]]

    def rounds_to(self, tol: float, column: int = 1) -> int | None:
        for row in self.convergence:
            if row[column] <= tol:
                return row[0]
        return None


def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None,
                   network: SensorNetwork | None = None) -> ExperimentResult:
    """DWLS vs. centralized WLS vs. block-Jacobi, plus per-node bound checks.

    Writes ``convergence.csv``, ``depth_cov.csv`` and ``depth_est.csv`` to
    ``out_dir`` when given.
    """
    net = network if network is not None else generate(config)
    ref = oracle.solve(net)
    x_ref = ref.x
    probes = net.nodes if config.probes == "all" else list(config.probes)

    depths = {p: loop_free_depth(net, p) for p in probes}
    eval_round = {p: clamp_depth(d, net, p) + 1 for p, d in depths.items()}
    total = max(config.rounds, max(eval_round.values(), default=1))
    traj = run(net, rounds=total)
    jac = jacobi_baseline(net, config.rounds)

    convergence = []
    for N in range(1, config.rounds + 1):
        dw = float(np.linalg.norm(traj.stacked_estimate(N) - x_ref))
        jb = float(np.linalg.norm(jac[N - 1] - x_ref))
        convergence.append((N, dw, jb))

    reports = network_bounds(net, probes)
    depth_cov, depth_est = [], []
    for p in probes:
        d = depths[p]
        b = traj.belief(eval_round[p], p)
        label = "unbounded" if isinstance(d, Unbounded) else d
        cov_rep, est_rep = reports[p]
        cm = float(np.linalg.norm(b.Sigma - ref.cov_of(p), 2))
        em = float(np.linalg.norm(b.x_hat - ref.x_of(p)))
        depth_cov.append((p, label, cm, cov_rep.bound, cov_rep.applicable))
        depth_est.append((p, label, em, est_rep.bound, est_rep.applicable))

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "convergence.csv", ["round", "dwls_mismatch", "jacobi_mismatch"], convergence)
        _write(out / "depth_cov.csv", ["node", "depth", "cov_mismatch", "cov_bound", "applicable"],
               depth_cov)
        _write(out / "depth_est.csv", ["node", "depth", "est_mismatch", "est_bound", "applicable"],
               depth_est)
    return ExperimentResult(convergence, depth_cov, depth_est)


def eccentricity(network: SensorNetwork, node: int) -> int:
    return max(bfs_distances(network, node).values())
