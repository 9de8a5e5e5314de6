"""Centralized weighted least squares: the reference every distributed result is checked against."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse import linalg as spla

from .linalg import solve_first_block, sym
from .network import SensorNetwork, edge_key, neighborhood
from .transforms import LineSystem

SPARSE_THRESHOLD = 500
LINE_CHECK_RTOL = 1e-8


class LineCrossCheckError(np.linalg.LinAlgError):
    """The band recursion disagreed with the dense solve of the same chain."""


@dataclass(frozen=True, eq=False)
class GlobalSystem:
    """Stacked measurement model ``z = H x + v``, ``v ~ N(0, R)``.

    Rows are all self measurements in node order, then all joint
    measurements in lexicographic edge order. Columns follow ascending node id.
    """

    H: np.ndarray
    R: np.ndarray
    z: np.ndarray | None
    offsets: dict[int, slice]

    @classmethod
    def assemble(cls, network: SensorNetwork, nodes: Iterable[int] | None = None) -> "GlobalSystem":
        keep = sorted(network.nodes if nodes is None else nodes)
        keep_set = set(keep)
        offs = network.offsets(keep)
        ncol = sum(network.dim(i) for i in keep)
        rows, Rs, zs = [], [], []
        for i in keep:
            m = network.measurement(i)
            r = np.zeros((m.dim, ncol))
            r[:, offs[i]] = m.C
            rows.append(r)
            Rs.append(m.R)
            zs.append(m.z)
        for e in network.edges:
            if e.i in keep_set and e.j in keep_set:
                r = np.zeros((e.dim, ncol))
                r[:, offs[e.i]] = e.C_ij
                r[:, offs[e.j]] = e.C_ji
                rows.append(r)
                Rs.append(e.R)
                zs.append(e.z)
        z = np.concatenate(zs) if all(v is not None for v in zs) else None
        return cls(np.vstack(rows), sla.block_diag(*Rs), z, offs)


@dataclass(frozen=True, eq=False)
class WLSSolution:
    x: np.ndarray
    cov: np.ndarray
    offsets: dict[int, slice]

    def x_of(self, i: int) -> np.ndarray:
        return self.x[self.offsets[i]]

    def cov_of(self, i: int) -> np.ndarray:
        s = self.offsets[i]
        return self.cov[s, s]

    def per_node(self) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
        return ({i: self.x_of(i) for i in self.offsets},
                {i: self.cov_of(i) for i in self.offsets})


def information(network: SensorNetwork, nodes: Iterable[int] | None = None,
                as_sparse: bool = False):
    """Information matrix and vector summed one measurement at a time.

    Returns ``(J, h, offsets)``; ``h`` is None for unsampled networks.
    """
    keep = sorted(network.nodes if nodes is None else nodes)
    keep_set = set(keep)
    offs = network.offsets(keep)
    n = sum(network.dim(i) for i in keep)
    sampled = network.is_sampled
    h = np.zeros(n) if sampled else None
    trip_r, trip_c, trip_v = [], [], []

    def add(si: slice, sj: slice, block: np.ndarray):
        ii, jj = np.meshgrid(np.arange(si.start, si.stop), np.arange(sj.start, sj.stop),
                             indexing="ij")
        trip_r.append(ii.ravel())
        trip_c.append(jj.ravel())
        trip_v.append(block.ravel())

    for i in keep:
        m = network.measurement(i)
        RiC = np.linalg.solve(m.R, m.C)
        add(offs[i], offs[i], m.C.T @ RiC)
        if sampled:
            h[offs[i]] += RiC.T @ m.z
    for e in network.edges:
        if e.i not in keep_set or e.j not in keep_set:
            continue
        Ri_a = np.linalg.solve(e.R, e.C_ij)
        Ri_b = np.linalg.solve(e.R, e.C_ji)
        add(offs[e.i], offs[e.i], e.C_ij.T @ Ri_a)
        add(offs[e.j], offs[e.j], e.C_ji.T @ Ri_b)
        add(offs[e.i], offs[e.j], e.C_ij.T @ Ri_b)
        add(offs[e.j], offs[e.i], e.C_ji.T @ Ri_a)
        if sampled:
            h[offs[e.i]] += Ri_a.T @ e.z
            h[offs[e.j]] += Ri_b.T @ e.z
    J = sparse.coo_matrix(
        (np.concatenate(trip_v), (np.concatenate(trip_r), np.concatenate(trip_c))),
        shape=(n, n),
    ).tocsc()
    if not as_sparse:
        J = sym(J.toarray())
    return J, h, offs


def solve(network: SensorNetwork, nodes: Iterable[int] | None = None) -> WLSSolution:
    """Centralized WLS ``x = (H^T R^-1 H)^-1 H^T R^-1 z`` and its covariance.

    Raises ``numpy.linalg.LinAlgError`` when the information matrix is singular.
    """
    keep = sorted(network.nodes if nodes is None else nodes)
    n = sum(network.dim(i) for i in keep)
    if not network.is_sampled:
        raise ValueError("network measurements are not sampled")
    if n > SPARSE_THRESHOLD:
        J, h, offs = information(network, keep, as_sparse=True)
        if not (np.all(np.isfinite(J.data)) and np.all(np.isfinite(h))):
            raise np.linalg.LinAlgError("information matrix or vector is not finite")
        lu = spla.splu(J)
        x = lu.solve(h)
        cov = sym(lu.solve(np.eye(n)))
        if not np.all(np.isfinite(cov)) or np.linalg.eigvalsh(cov)[0] <= 0:
            raise np.linalg.LinAlgError("information matrix is singular")
        return WLSSolution(x, cov, offs)
    J, h, offs = information(network, keep)
    if not (np.all(np.isfinite(J)) and np.all(np.isfinite(h))):
        raise np.linalg.LinAlgError("information matrix or vector is not finite")
    try:
        c = sla.cho_factor(J, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("information matrix is singular") from exc
    x = sla.cho_solve(c, h)
    cov = sym(sla.cho_solve(c, np.eye(n)))
    return WLSSolution(x, cov, offs)


def solve_restricted(network: SensorNetwork, root: int, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """WLS at ``root`` using only nodes within ``radius`` hops and the edges among them."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    sol = solve(network, neighborhood(network, root, radius))
    return sol.x_of(root), sol.cov_of(root)


def solve_line(line: LineSystem, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """First-layer WLS estimate and covariance of a chain via the band recursion.

    With ``check`` the result is compared against a dense solve of the same
    normal equations and :class:`LineCrossCheckError` is raised on disagreement.
    """
    system = line.normal_equations()
    if not system.rhs_blocks:
        raise ValueError("line system is not sampled")
    x1, S11 = solve_first_block(system)
    if check:
        Q = system.dense()
        n1 = system.sizes[0]
        c = sla.cho_factor(Q, lower=True)
        xd = sla.cho_solve(c, system.dense_rhs())[:n1]
        Sd = sla.cho_solve(c, np.eye(Q.shape[0])[:, :n1])[:n1]
        # ||Sigma|| * ||q|| is the natural size of x, also when x itself vanishes
        scale = max(np.linalg.norm(xd), np.linalg.norm(Q, -2) ** -1 * np.linalg.norm(system.dense_rhs()))
        ex = np.linalg.norm(x1 - xd) / max(scale, 1e-300)
        es = np.linalg.norm(S11 - Sd) / np.linalg.norm(Sd)
        if max(ex, es) > LINE_CHECK_RTOL:
            raise LineCrossCheckError(
                f"band recursion disagrees with dense solve (x: {ex:.2e}, cov: {es:.2e})"
            )
    return x1, S11


def edge_rows(network: SensorNetwork, i: int, j: int) -> slice:
    """Row slice of joint measurement ``{i, j}`` inside :meth:`GlobalSystem.assemble`."""
    start = sum(network.measurement(k).dim for k in network.nodes)
    key = edge_key(i, j)
    for e in network.edges:
        if e.key == key:
            return slice(start, start + e.dim)
        start += e.dim
    raise KeyError(f"no edge {key}")
