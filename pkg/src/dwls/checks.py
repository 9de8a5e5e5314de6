"""Randomized invariant suites, shared by the ``dwls verify`` command and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import networkx as nx
import numpy as np

from . import oracle
from .bounds import covariance_bound, estimate_bound
from .engine import InitSet, run
from .harness import ExperimentConfig, generate, random_measurements
from .linalg import (
    BandedBlockSystem,
    opnorm,
    riemannian_distance,
    sigma_min,
    sqrtm_psd,
    sym,
)
from .network import Unbounded, graph_stats, loop_free_depth
from .transforms import collapse_to_line, unroll


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


# ----------------------------------------------------------------------------
# Random instances


def random_spd(rng: np.random.Generator, n: int, cond: float = 1e3) -> np.ndarray:
    """SPD matrix with log-uniform spectrum in ``[1, cond]`` and random eigenvectors."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0.0, math.log(cond), n))
    return sym((Q * w) @ Q.T)


def random_tridiagonal(rng: np.random.Generator, n_blocks: int, max_size: int = 4) -> BandedBlockSystem:
    """Random SPD block-tridiagonal system with rhs."""
    sizes = rng.integers(1, max_size + 1, n_blocks)
    off = np.concatenate([[0], np.cumsum(sizes)])
    A = rng.standard_normal((off[-1], off[-1]))
    M = A @ A.T
    mask = np.zeros_like(M, dtype=bool)
    for k in range(n_blocks):
        lo = off[max(k - 1, 0)]
        hi = off[min(k + 2, n_blocks)]
        mask[off[k]:off[k + 1], lo:hi] = True
    M = np.where(mask, M, 0.0)
    # make it safely positive definite after masking
    M = sym(M) + (abs(np.linalg.eigvalsh(sym(M))[0]) + rng.uniform(0.1, 2.0)) * np.eye(off[-1])
    diag = tuple(M[off[k]:off[k + 1], off[k]:off[k + 1]] for k in range(n_blocks))
    sup = tuple(M[off[k]:off[k + 1], off[k + 1]:off[k + 2]] for k in range(n_blocks - 1))
    rhs = tuple(rng.standard_normal(s) for s in sizes)
    return BandedBlockSystem(diag, sup, rhs)


def random_loopy_graph(rng: np.random.Generator, n: int, extra: int = 2) -> nx.Graph:
    """Random spanning tree on ``n`` nodes plus ``extra`` random chords."""
    g = nx.random_labeled_tree(n, seed=int(rng.integers(2**32))) if n > 1 else nx.empty_graph(1)
    non = [(u, v) for u in range(n) for v in range(u + 1, n) if not g.has_edge(u, v)]
    for k in rng.permutation(len(non))[:extra]:
        g.add_edge(*non[k])
    return g


def random_tree_network(rng: np.random.Generator, n: int):
    g = nx.random_labeled_tree(n, seed=int(rng.integers(2**32))) if n > 1 else nx.empty_graph(1)
    return random_measurements(g, rng)


def uniform_network(rng: np.random.Generator, nodes: int | None = None, degree: int = 3,
                     family: str = "ring-of-trees"):
    """Uniform-coefficient network with a random topology."""
    n = nodes or int(rng.integers(10, 25))
    if family == "random-regular" and (n * degree) % 2:
        n += 1
    ring = int(rng.integers(3, 7)) if family == "ring-of-trees" else None
    return generate(ExperimentConfig(nodes=n, degree=degree, family=family,
                                     seed=int(rng.integers(2**31)), ring_size=ring))


# ----------------------------------------------------------------------------
# Suites


@dataclass
class SuiteResult:
    name: str
    trials: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def check(self, cond: bool, what: str) -> None:
        self.trials += 1
        if not cond:
            self.failures.append(what)

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status} {self.name}: {self.trials - len(self.failures)}/{self.trials} checks"


def riemann_suite(rng: np.random.Generator, trials: int = 200, tol: float = 1e-8) -> SuiteResult:
    res = SuiteResult("riemann")
    for t in range(trials):
        n = int(rng.integers(1, 6))
        P, Q = random_spd(rng, n), random_spd(rng, n)
        d = riemannian_distance(P, Q)
        scale = max(1.0, d)

        res.check(riemannian_distance(P, P) <= tol, f"[{t}] d(P,P) != 0")

        d_inv = riemannian_distance(np.linalg.inv(P), np.linalg.inv(Q))
        d_sw = riemannian_distance(Q, P)
        res.check(abs(d_inv - d) <= tol * scale and abs(d_sw - d) <= tol * scale,
                  f"[{t}] inverse/swap symmetry")

        m = int(rng.integers(1, n + 1))
        B = rng.standard_normal((m, n))
        res.check(riemannian_distance(B @ P @ B.T, B @ Q @ B.T) <= d + tol * scale,
                  f"[{t}] congruence contraction")
        Bsq = rng.standard_normal((n, n)) + n * np.eye(n)
        res.check(abs(riemannian_distance(Bsq @ P @ Bsq.T, Bsq @ Q @ Bsq.T) - d) <= tol * scale,
                  f"[{t}] congruence invariance")

        W = random_spd(rng, n, 10.0) * rng.uniform(0, 2) if rng.random() < 0.8 else np.zeros((n, n))
        big = Q + random_spd(rng, n, 10.0) * rng.uniform(0.01, 1.0)  # big >= Q
        res.check(riemannian_distance(big + W, Q) >= riemannian_distance(big, Q) - tol * scale,
                  f"[{t}] monotone in added PSD term")

        m = int(rng.integers(1, 5))
        W = random_spd(rng, m, 100.0) * rng.uniform(0.01, 10)
        B = rng.standard_normal((m, n)) * rng.uniform(0.1, 3)
        Pi, Qi = np.linalg.inv(P), np.linalg.inv(Q)
        alpha = max(opnorm(B @ Pi @ B.T), opnorm(B @ Qi @ B.T))
        beta = sigma_min(W)
        lhs = riemannian_distance(W + B @ Pi @ B.T, W + B @ Qi @ B.T)
        res.check(lhs <= alpha / (alpha + beta) * d + tol * scale, f"[{t}] strict contraction")

        G = random_spd(rng, n, 10.0) * rng.uniform(0.01, 3)
        Pp = Q + G
        lhs = opnorm(Pp - Q)
        rhs = math.expm1(riemannian_distance(Pp, Q)) * opnorm(Q)
        res.check(lhs <= rhs * (1 + tol) + tol, f"[{t}] norm gap")
    return res


def equiv_suite(rng: np.random.Generator, trials: int = 30, max_rounds: int = 6,
                tol: float = 1e-9) -> SuiteResult:
    res = SuiteResult("equiv")
    for t in range(trials):
        n = int(rng.integers(3, 13))
        net = random_measurements(random_loopy_graph(rng, n, int(rng.integers(1, 4))), rng)
        traj = run(net, rounds=max_rounds)
        for N in range(1, max_rounds + 1):
            x, S = oracle.solve_line(collapse_to_line(unroll(net, 1, N)), check=False)
            b = traj.belief(N, 1)
            res.check(rel_err(b.x_hat, x) <= tol and rel_err(b.Q, np.linalg.inv(S)) <= tol,
                      f"[{t}] round {N}: engine vs line mismatch")
    return res


def acyclic_suite(rng: np.random.Generator, trials: int = 50, tol: float = 1e-9) -> SuiteResult:
    res = SuiteResult("acyclic")
    for t in range(trials):
        net = random_tree_network(rng, int(rng.integers(5, 31)))
        rounds = graph_stats(net).diameter + 1
        traj = run(net, rounds=rounds)
        ref = oracle.solve(net)
        # per-node errors over the stacked scale: single blocks can sit arbitrarily near zero
        scale = max(np.linalg.norm(ref.x), 1e-300)
        worst = max(np.linalg.norm(traj.belief(rounds, i).x_hat - ref.x_of(i)) / scale
                    for i in net.nodes)
        worst_c = max(rel_err(traj.belief(rounds, i).Sigma, ref.cov_of(i)) for i in net.nodes)
        res.check(worst <= tol and worst_c <= tol, f"[{t}] rel error {worst:.2e}/{worst_c:.2e}")
    return res


def bounds_suite(rng: np.random.Generator, trials: int = 30, extra_rounds: int = 10) -> SuiteResult:
    res = SuiteResult("bounds")
    for t in range(trials):
        net = uniform_network(rng)
        cov = covariance_bound(net, 1)
        est = estimate_bound(net, 1, _cov=cov)
        l1 = loop_free_depth(net, 1)
        if isinstance(l1, Unbounded):
            continue
        traj = run(net, rounds=l1 + 1 + extra_rounds)
        ref = oracle.solve(net)
        for N in range(l1 + 1, l1 + 2 + extra_rounds):
            b = traj.belief(N, 1)
            if cov.applicable:
                m = np.linalg.norm(b.Sigma - ref.cov_of(1), 2)
                res.check(m <= cov.bound, f"[{t}] N={N} cov {m:.3e} > {cov.bound:.3e}")
            if est.applicable:
                m = np.linalg.norm(b.x_hat - ref.x_of(1))
                res.check(m <= est.bound, f"[{t}] N={N} est {m:.3e} > {est.bound:.3e}")
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "riemann": riemann_suite,
    "equiv": equiv_suite,
    "bounds": bounds_suite,
    "acyclic": acyclic_suite,
}


def admissible_init(rng: np.random.Generator, network):
    """Random init set with ``0 <= Q0 <= C^T R^-1 C`` on every directed edge."""
    out = {}
    for s, r in network.directed_edges():
        cap = network.joint_information(r, s)
        n = cap.shape[0]
        U, _ = np.linalg.qr(rng.standard_normal((n, n)))
        W = (U * rng.uniform(0, 1, n)) @ U.T  # 0 <= W <= I
        half = sqrtm_psd(cap)
        out[(s, r)] = sym(half @ W @ half)
    return InitSet(out)
