"""Equivalent representations of the network seen from a probe node.

* :func:`unroll` builds the depth-N computation tree (a non-backtracking
  unrolling of the graph with copied measurements).
* :func:`collapse_to_line` merges every tree layer into one super-node,
  giving a chain whose node-1 WLS solution equals the round-N belief.
* :func:`layered_line` merges the BFS layers of the original graph,
  folding intra-layer joint measurements into the layer's own block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.linalg import block_diag

from .linalg import BandedBlockSystem, opnorm, sigma_min, sym
from .network import (
    JointMeasurement,
    SelfMeasurement,
    SensorNetwork,
    bfs_distances,
)

DEFAULT_MAX_TREE_NODES = 100_000


class TreeOverflowError(RuntimeError):
    """The computation tree would exceed the configured node cap."""


@dataclass(frozen=True)
class TreeNode:
    id: int
    origin: int
    parent: int | None
    layer: int  # 1-based; the root is in layer 1


@dataclass(frozen=True, eq=False)
class ComputationTree:
    """Depth-``N`` unrolling of a network rooted at ``root``.

    Tree node ``0`` is the root. ``nodes[k].origin`` is the canonical node
    that tree node ``k`` copies. Measurements are shared with the canonical
    network: the self measurement of tree node ``k`` is that of its origin,
    and the joint measurement on tree edge ``(parent, k)`` is that of the
    canonical edge between the two origins.
    """

    network: SensorNetwork
    root: int
    depth: int
    nodes: tuple[TreeNode, ...]
    children: tuple[tuple[int, ...], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def layers(self) -> list[list[int]]:
        out: list[list[int]] = []
        for n in self.nodes:  # nodes are stored in BFS order
            if n.layer > len(out):
                out.append([])
            out[n.layer - 1].append(n.id)
        return out

    def self_measurement(self, k: int) -> SelfMeasurement:
        return self.network.measurement(self.nodes[k].origin)

    def joint_measurement(self, k: int) -> JointMeasurement:
        """Copy of the joint measurement on the edge between ``k`` and its parent."""
        p = self.nodes[k].parent
        if p is None:
            raise KeyError("the root has no parent edge")
        return self.network.edge(self.nodes[p].origin, self.nodes[k].origin)

    def to_network(self) -> SensorNetwork:
        """The tree as a stand-alone network with ids ``k + 1`` (root becomes 1)."""
        net = self.network
        dims = {n.id + 1: net.dim(n.origin) for n in self.nodes}
        meas = {n.id + 1: self.self_measurement(n.id) for n in self.nodes}
        edges = []
        for n in self.nodes[1:]:
            p = self.nodes[n.parent]
            e = net.edge(p.origin, n.origin)
            edges.append(JointMeasurement(
                p.id + 1, n.id + 1, e.coef(p.origin), e.coef(n.origin), e.R, e.z,
            ))
        return SensorNetwork(dims, meas, edges)

    def to_dot(self) -> str:
        lines = ["graph computation_tree {"]
        for n in self.nodes:
            lines.append(f'  t{n.id} [label="{n.origin}"];')
        for n in self.nodes[1:]:
            lines.append(f"  t{n.parent} -- t{n.id};")
        lines.append("}")
        return "\n".join(lines)


def unroll(network: SensorNetwork, root: int, depth: int,
           max_nodes: int = DEFAULT_MAX_TREE_NODES) -> ComputationTree:
    """Unroll ``network`` from ``root`` into a tree with ``depth`` layers.

    Every tree node gets one child per canonical neighbour of its origin,
    except the origin of its own parent. Children are added in ascending
    canonical id.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if root not in network.nodes:
        raise KeyError(f"node {root} not in network")
    nodes = [TreeNode(0, root, None, 1)]
    children: list[list[int]] = [[]]
    frontier = [0]
    for layer in range(2, depth + 1):
        nxt = []
        for t in frontier:
            tn = nodes[t]
            back = nodes[tn.parent].origin if tn.parent is not None else None
            for j in network.neighbors(tn.origin):
                if j == back:
                    continue
                if len(nodes) >= max_nodes:
                    raise TreeOverflowError(
                        f"computation tree of depth {depth} exceeds {max_nodes} nodes"
                    )
                k = len(nodes)
                nodes.append(TreeNode(k, j, t, layer))
                children.append([])
                children[t].append(k)
                nxt.append(k)
        if not nxt:
            break
        frontier = nxt
    return ComputationTree(network, root, depth, tuple(nodes),
                           tuple(tuple(c) for c in children))


# ----------------------------------------------------------------------------
# Line systems


@dataclass(frozen=True, eq=False)
class LineSystem:
    """Chain of super-nodes with stacked block measurements.

    Layer ``k`` (0-based here) stacks the states of ``members[k]``. Its own
    measurement is ``z_self[k] = C_self[k] x_k + v`` with covariance
    ``R_self[k]``; the link to the next layer is
    ``z_link[k] = C_down[k] x_k + C_up[k] x_{k+1} + v`` with covariance
    ``R_link[k]``. ``C_down[k]`` is the coefficient of the *upper* layer
    (the one nearer the probe) and ``C_up[k]`` that of the lower layer.

    ``z`` entries are None when the source network is not sampled.
    """

    members: tuple[tuple[Hashable, ...], ...]
    origin: dict
    sizes: tuple[tuple[int, ...], ...]
    C_self: tuple[np.ndarray, ...]
    R_self: tuple[np.ndarray, ...]
    z_self: tuple[np.ndarray | None, ...]
    C_down: tuple[np.ndarray, ...]
    C_up: tuple[np.ndarray, ...]
    R_link: tuple[np.ndarray, ...]
    z_link: tuple[np.ndarray | None, ...]

    @property
    def n_layers(self) -> int:
        return len(self.members)

    def layer_dim(self, k: int) -> int:
        return int(sum(self.sizes[k]))

    @property
    def sampled(self) -> bool:
        return all(z is not None for z in self.z_self) and all(
            z is not None for z in self.z_link)

    def truncate(self, n_layers: int) -> "LineSystem":
        """Keep the first ``n_layers`` layers and the links among them."""
        if not 1 <= n_layers <= self.n_layers:
            raise ValueError(f"cannot truncate {self.n_layers} layers to {n_layers}")
        k = n_layers
        return LineSystem(
            self.members[:k], self.origin, self.sizes[:k],
            self.C_self[:k], self.R_self[:k], self.z_self[:k],
            self.C_down[:k - 1], self.C_up[:k - 1], self.R_link[:k - 1], self.z_link[:k - 1],
        )

    # -- normal equations ---------------------------------------------------

    def normal_equations(self) -> BandedBlockSystem:
        """Block-tridiagonal information matrix and vector of the chain."""
        L = self.n_layers
        diag = []
        for k in range(L):
            Ri_C = np.linalg.solve(self.R_self[k], self.C_self[k])
            diag.append(self.C_self[k].T @ Ri_C)
        sup = []
        for k in range(L - 1):
            Ri_down = np.linalg.solve(self.R_link[k], self.C_down[k])
            Ri_up = np.linalg.solve(self.R_link[k], self.C_up[k])
            diag[k] = diag[k] + self.C_down[k].T @ Ri_down
            diag[k + 1] = diag[k + 1] + self.C_up[k].T @ Ri_up
            sup.append(self.C_down[k].T @ Ri_up)
        rhs = ()
        if self.sampled:
            rhs = [self.C_self[k].T @ np.linalg.solve(self.R_self[k], self.z_self[k])
                   for k in range(L)]
            for k in range(L - 1):
                w = np.linalg.solve(self.R_link[k], self.z_link[k])
                rhs[k] = rhs[k] + self.C_down[k].T @ w
                rhs[k + 1] = rhs[k + 1] + self.C_up[k].T @ w
            rhs = tuple(rhs)
        return BandedBlockSystem(tuple(sym(D) for D in diag), tuple(sup), rhs)

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        """Dense ``(A, S, y)`` with ``y = A x + w``, ``w ~ N(0, S)``.

        Row block ``k`` holds layer ``k``'s own measurement followed by the
        link to layer ``k + 1``.
        """
        L = self.n_layers
        dims = [self.layer_dim(k) for k in range(L)]
        col = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        rows_A, rows_S, rows_y = [], [], []
        for k in range(L):
            blk = np.zeros((self.C_self[k].shape[0], col[-1]))
            blk[:, col[k]:col[k + 1]] = self.C_self[k]
            rows_A.append(blk)
            rows_S.append(self.R_self[k])
            rows_y.append(self.z_self[k])
            if k < L - 1:
                blk = np.zeros((self.C_down[k].shape[0], col[-1]))
                blk[:, col[k]:col[k + 1]] = self.C_down[k]
                blk[:, col[k + 1]:col[k + 2]] = self.C_up[k]
                rows_A.append(blk)
                rows_S.append(self.R_link[k])
                rows_y.append(self.z_link[k])
        A = np.vstack(rows_A)
        S = block_diag(*rows_S)
        y = np.concatenate(rows_y) if self.sampled else None
        return A, S, y

    def spectral_constants(self) -> dict[str, float]:
        """Constants bounding ``A^T A`` and the information matrix of the chain.

        ``eps_over`` and ``eps_under`` bound the singular values of ``A``;
        ``q_over`` and ``q_under`` bound the spectrum of the information matrix.
        """
        L = self.n_layers

        def link_norm(k: int) -> float:
            if 0 <= k < L - 1:
                return max(opnorm(self.C_down[k]), opnorm(self.C_up[k])) ** 2
            return 0.0

        eps_over = max(
            np.sqrt(opnorm(self.C_self[k]) ** 2 + 2 * link_norm(k - 1) + 2 * link_norm(k))
            for k in range(L)
        )
        eps_under = min(sigma_min(C) for C in self.C_self)
        Rs = list(self.R_self) + list(self.R_link)
        r_over = max(opnorm(R) for R in Rs)
        r_under = min(sigma_min(R) for R in Rs)
        return {
            "eps_over": float(eps_over),
            "eps_under": float(eps_under),
            "r_over": r_over,
            "r_under": r_under,
            "q_over": float(eps_over ** 2 / r_under),
            "q_under": float(eps_under ** 2 / r_over),
        }


def _assemble(
    layers: Sequence[Sequence[Hashable]],
    origin: dict,
    network: SensorNetwork,
    intra: Sequence[Sequence[tuple[Hashable, Hashable]]],
    inter: Sequence[Sequence[tuple[Hashable, Hashable]]],
) -> LineSystem:
    """Build a LineSystem from layer members and edge lists.

    ``intra[k]`` lists edges inside layer ``k`` (folded into the layer's own
    measurement), ``inter[k]`` lists ``(upper, lower)`` edges between layers
    ``k`` and ``k + 1``. Each row block is placed at its endpoints' columns.
    """
    sampled = network.is_sampled
    sizes, C_self, R_self, z_self = [], [], [], []
    col_of: list[dict] = []
    for k, mem in enumerate(layers):
        dims = [network.dim(origin[t]) for t in mem]
        off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        cols = {t: slice(off[a], off[a + 1]) for a, t in enumerate(mem)}
        col_of.append(cols)
        width = int(off[-1])
        blocks, Rs, zs = [], [], []
        for t in mem:
            m = network.measurement(origin[t])
            row = np.zeros((m.dim, width))
            row[:, cols[t]] = m.C
            blocks.append(row)
            Rs.append(m.R)
            zs.append(m.z)
        for s, t in intra[k]:
            e = network.edge(origin[s], origin[t])
            row = np.zeros((e.dim, width))
            row[:, cols[s]] = e.coef(origin[s])
            row[:, cols[t]] = e.coef(origin[t])
            blocks.append(row)
            Rs.append(e.R)
            zs.append(e.z)
        sizes.append(tuple(dims))
        C_self.append(np.vstack(blocks))
        R_self.append(block_diag(*Rs))
        z_self.append(np.concatenate(zs) if sampled else None)

    C_down, C_up, R_link, z_link = [], [], [], []
    for k in range(len(layers) - 1):
        w_up = sum(sizes[k])
        w_dn = sum(sizes[k + 1])
        dn_blocks, up_blocks, Rs, zs = [], [], [], []
        for p, c in inter[k]:
            e = network.edge(origin[p], origin[c])
            a = np.zeros((e.dim, w_up))
            a[:, col_of[k][p]] = e.coef(origin[p])
            b = np.zeros((e.dim, w_dn))
            b[:, col_of[k + 1][c]] = e.coef(origin[c])
            dn_blocks.append(a)
            up_blocks.append(b)
            Rs.append(e.R)
            zs.append(e.z)
        C_down.append(np.vstack(dn_blocks))
        C_up.append(np.vstack(up_blocks))
        R_link.append(block_diag(*Rs))
        z_link.append(np.concatenate(zs) if sampled else None)

    return LineSystem(
        tuple(tuple(m) for m in layers), dict(origin), tuple(sizes),
        tuple(C_self), tuple(R_self), tuple(z_self),
        tuple(C_down), tuple(C_up), tuple(R_link), tuple(z_link),
    )


def collapse_to_line(tree: ComputationTree) -> LineSystem:
    """Merge every layer of a computation tree into one super-node.

    Layer members keep the tree's BFS order, which is parent-major: the
    children of the first node of layer ``n`` come first in layer ``n + 1``.
    The link block between layers is then the stack of each parent's
    child coefficients against the block-diagonal of the children's own.
    """
    layers = tree.layers()
    origin = {n.id: n.origin for n in tree.nodes}
    intra = [[] for _ in layers]
    inter = [
        [(tree.nodes[c].parent, c) for c in layers[k + 1]]
        for k in range(len(layers) - 1)
    ]
    return _assemble(layers, origin, tree.network, intra, inter)


def layered_line(network: SensorNetwork, root: int) -> LineSystem:
    """Chain of BFS layers of ``network`` around ``root``.

    Layer ``k`` holds the nodes at distance ``k - 1`` in ascending id. Joint
    measurements inside a layer join that layer's own measurement block;
    edges between consecutive layers, ordered by (upper id, lower id), form
    the links.
    """
    dist = bfs_distances(network, root)
    if len(dist) != network.n_nodes:
        raise ValueError("network is disconnected")
    depth = max(dist.values())
    layers = [sorted(i for i, d in dist.items() if d == k) for k in range(depth + 1)]
    intra = [[] for _ in layers]
    inter = [[] for _ in range(depth)]
    for e in network.edges:
        di, dj = dist[e.i], dist[e.j]
        if di == dj:
            intra[di].append((e.i, e.j))
        elif di < dj:
            inter[di].append((e.i, e.j))
        else:
            inter[dj].append((e.j, e.i))
    inter = [sorted(x) for x in inter]
    origin = {i: i for i in network.nodes}
    return _assemble(layers, origin, network, intra, inter)
