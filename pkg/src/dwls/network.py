"""Sensor network data model, validation and graph metrics.

A network is an undirected graph. Every node ``i`` owns a state block of
dimension ``n_i`` and a self measurement ``z_i = C_i x_i + v_i``; every edge
``{i, j}`` carries one joint measurement ``z_ij = C_ij x_i + C_ji x_j + v_ij``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

PSD_EPS = 1e-10


def _frozen(a, ndim: int | None = None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if ndim == 2:
        arr = np.atleast_2d(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SelfMeasurement:
    C: np.ndarray
    R: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "C", _frozen(self.C, 2))
        object.__setattr__(self, "R", _frozen(self.R, 2))
        if self.z is not None:
            object.__setattr__(self, "z", _frozen(np.atleast_1d(self.z)))

    @property
    def dim(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True, eq=False)
class JointMeasurement:
    """Joint measurement on the unordered pair ``{i, j}``, stored with ``i < j``.

    ``C_ij`` multiplies ``x_i`` and ``C_ji`` multiplies ``x_j``.
    """

    i: int
    j: int
    C_ij: np.ndarray
    C_ji: np.ndarray
    R: np.ndarray
    z: np.ndarray | None = None

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError(f"self-loop on node {self.i}")
        if self.i > self.j:
            # canonical orientation
            i, j, cij, cji = self.j, self.i, self.C_ji, self.C_ij
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)
            object.__setattr__(self, "C_ij", cij)
            object.__setattr__(self, "C_ji", cji)
        object.__setattr__(self, "C_ij", _frozen(self.C_ij, 2))
        object.__setattr__(self, "C_ji", _frozen(self.C_ji, 2))
        object.__setattr__(self, "R", _frozen(self.R, 2))
        if self.z is not None:
            object.__setattr__(self, "z", _frozen(np.atleast_1d(self.z)))

    @property
    def key(self) -> tuple[int, int]:
        return (self.i, self.j)

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    def coef(self, node: int) -> np.ndarray:
        """The matrix multiplying ``x_node`` in this measurement."""
        if node == self.i:
            return self.C_ij
        if node == self.j:
            return self.C_ji
        raise KeyError(f"node {node} is not an endpoint of edge {self.key}")

    def other(self, node: int) -> int:
        if node == self.i:
            return self.j
        if node == self.j:
            return self.i
        raise KeyError(f"node {node} is not an endpoint of edge {self.key}")


def edge_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


class SensorNetwork:
    """Immutable canonical measurement graph.

    Parameters
    ----------
    dims : mapping NodeId -> int
        State dimension of every node.
    measurements : mapping NodeId -> SelfMeasurement
    edges : iterable of JointMeasurement
    true_state : mapping NodeId -> vector, optional
        Ground truth used to synthesize the measurements, if known.
    """

    def __init__(
        self,
        dims: Mapping[int, int],
        measurements: Mapping[int, SelfMeasurement],
        edges: Iterable[JointMeasurement] = (),
        true_state: Mapping[int, np.ndarray] | None = None,
    ):
        self._dims = {int(i): int(n) for i, n in sorted(dims.items())}
        self._self = {int(i): m for i, m in sorted(measurements.items())}
        self._edges: dict[tuple[int, int], JointMeasurement] = {}
        adj: dict[int, set[int]] = {i: set() for i in self._dims}
        for e in edges:
            if e.key in self._edges:
                raise ValueError(f"duplicate joint measurement on edge {e.key}")
            for end in e.key:
                if end not in adj:
                    raise ValueError(f"edge {e.key} references unknown node {end}")
            self._edges[e.key] = e
            adj[e.i].add(e.j)
            adj[e.j].add(e.i)
        self._edges = dict(sorted(self._edges.items()))
        self._nbrs = {i: tuple(sorted(s)) for i, s in adj.items()}
        self.true_state = (
            None if true_state is None
            else {int(i): _frozen(np.atleast_1d(x)) for i, x in sorted(true_state.items())}
        )

    # -- lookup -------------------------------------------------------------

    @property
    def nodes(self) -> list[int]:
        return list(self._dims)

    @property
    def n_nodes(self) -> int:
        return len(self._dims)

    @property
    def edges(self) -> list[JointMeasurement]:
        return list(self._edges.values())

    def dim(self, i: int) -> int:
        return self._dims[i]

    def measurement(self, i: int) -> SelfMeasurement:
        return self._self[i]

    def has_measurement(self, i: int) -> bool:
        return i in self._self

    def edge(self, i: int, j: int) -> JointMeasurement:
        return self._edges[edge_key(i, j)]

    def has_edge(self, i: int, j: int) -> bool:
        return edge_key(i, j) in self._edges

    def neighbors(self, i: int) -> tuple[int, ...]:
        """Neighbours of ``i`` in ascending order."""
        return self._nbrs[i]

    def degree(self, i: int) -> int:
        return len(self._nbrs[i])

    def directed_edges(self) -> list[tuple[int, int]]:
        """All ordered pairs ``(sender, receiver)`` in lexicographic order."""
        return [(i, j) for i in self._dims for j in self._nbrs[i]]

    def joint_coef(self, i: int, j: int) -> np.ndarray:
        """``C_{i,j}``: the matrix multiplying ``x_i`` in ``z_{i,j}``."""
        return self.edge(i, j).coef(i)

    def self_information(self, i: int) -> np.ndarray:
        """``C_i^T R_i^{-1} C_i``."""
        m = self._self[i]
        return m.C.T @ np.linalg.solve(m.R, m.C)

    def joint_information(self, i: int, j: int) -> np.ndarray:
        """``C_{i,j}^T R_{i,j}^{-1} C_{i,j}``: information the edge carries on ``x_i``."""
        e = self.edge(i, j)
        C = e.coef(i)
        return C.T @ np.linalg.solve(e.R, C)

    @property
    def is_sampled(self) -> bool:
        return all(m.z is not None for m in self._self.values()) and all(
            e.z is not None for e in self._edges.values()
        )

    def offsets(self, nodes: Iterable[int] | None = None) -> dict[int, slice]:
        """Column slices of each node's block in the stacked state vector."""
        out, k = {}, 0
        for i in (self.nodes if nodes is None else nodes):
            out[i] = slice(k, k + self._dims[i])
            k += self._dims[i]
        return out

    # -- derived networks ---------------------------------------------------

    def with_measurements(
        self,
        z_self: Mapping[int, np.ndarray],
        z_joint: Mapping[tuple[int, int], np.ndarray],
        true_state: Mapping[int, np.ndarray] | None = None,
    ) -> "SensorNetwork":
        """Copy of this network carrying the given measurement realisations."""
        meas = {
            i: SelfMeasurement(m.C, m.R, z_self[i]) for i, m in self._self.items()
        }
        edges = [
            JointMeasurement(e.i, e.j, e.C_ij, e.C_ji, e.R, z_joint[e.key])
            for e in self._edges.values()
        ]
        ts = self.true_state if true_state is None else true_state
        return SensorNetwork(self._dims, meas, edges, ts)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        nodes = []
        for i in self.nodes:
            m = self._self.get(i)
            d = {"id": i, "dim": self._dims[i]}
            if m is not None:
                d["C"] = m.C.tolist()
                d["R"] = m.R.tolist()
                if m.z is not None:
                    d["z"] = m.z.tolist()
            if self.true_state is not None and i in self.true_state:
                d["x"] = self.true_state[i].tolist()
            nodes.append(d)
        edges = []
        for e in self._edges.values():
            d = {"i": e.i, "j": e.j, "C_ij": e.C_ij.tolist(), "C_ji": e.C_ji.tolist(),
                 "R": e.R.tolist()}
            if e.z is not None:
                d["z"] = e.z.tolist()
            edges.append(d)
        return {"nodes": nodes, "edges": edges}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SensorNetwork":
        dims, meas, truth = {}, {}, {}
        for nd in doc["nodes"]:
            i = int(nd["id"])
            if i in dims:
                raise ValueError(f"duplicate node id {i}")
            dims[i] = int(nd["dim"])
            if "C" in nd:
                meas[i] = SelfMeasurement(nd["C"], nd["R"], nd.get("z"))
            if "x" in nd:
                truth[i] = nd["x"]
        edges = [
            JointMeasurement(int(ed["i"]), int(ed["j"]), ed["C_ij"], ed["C_ji"],
                             ed["R"], ed.get("z"))
            for ed in doc.get("edges", [])
        ]
        return cls(dims, meas, edges, truth or None)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "SensorNetwork":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def __repr__(self) -> str:
        return f"SensorNetwork(nodes={self.n_nodes}, edges={len(self._edges)})"


# ----------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    kind: str  # "dimension" | "not_spd" | "assumption1" | "missing" | "ids"
    where: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self) -> None:
        if self.violations:
            raise ValidationError(self)


class ValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "\n  ".join(str(v) for v in report.violations)
        super().__init__(f"network failed validation:\n  {lines}")


def _spd_problem(R: np.ndarray) -> str | None:
    if R.shape[0] != R.shape[1]:
        return f"R has non-square shape {R.shape}"
    scale = max(1.0, float(np.max(np.abs(R)))) if R.size else 1.0
    if R.size and np.max(np.abs(R - R.T)) > 1e-12 * scale:
        return "R is not symmetric"
    if R.size and np.linalg.eigvalsh(0.5 * (R + R.T))[0] <= 0:
        return "R is not positive definite"
    return None


def validate(network: SensorNetwork) -> ValidationReport:
    """Check dimensions, noise covariances and local observability of every node.

    Local observability means ``C_i^T R_i^{-1} C_i`` is positive definite,
    tested as smallest eigenvalue > ``PSD_EPS`` after symmetrization.
    """
    out: list[Violation] = []
    ids = network.nodes
    if ids != list(range(1, len(ids) + 1)):
        out.append(Violation("ids", "nodes", f"ids must be 1..{len(ids)}, got {ids}"))

    for i in ids:
        n = network.dim(i)
        where = f"node {i}"
        if n < 1:
            out.append(Violation("dimension", where, f"state dimension {n} < 1"))
            continue
        if not network.has_measurement(i):
            out.append(Violation("missing", where, "no self measurement"))
            continue
        m = network.measurement(i)
        mi = m.C.shape[0]
        if m.C.shape[1] != n:
            out.append(Violation("dimension", where, f"C has {m.C.shape[1]} columns, state dim is {n}"))
            continue
        if m.R.shape != (mi, mi):
            out.append(Violation("dimension", where, f"R has shape {m.R.shape}, want {(mi, mi)}"))
            continue
        if m.z is not None and m.z.shape != (mi,):
            out.append(Violation("dimension", where, f"z has length {m.z.shape[0]}, want {mi}"))
        bad = _spd_problem(m.R)
        if bad:
            out.append(Violation("not_spd", where, bad))
            continue
        info = m.C.T @ np.linalg.solve(m.R, m.C)
        lo = float(np.linalg.eigvalsh(0.5 * (info + info.T))[0])
        if lo <= PSD_EPS:
            out.append(Violation(
                "assumption1", where,
                f"C^T R^-1 C is not positive definite (min eigenvalue {lo:.3g})",
            ))

    for e in network.edges:
        where = f"edge ({e.i},{e.j})"
        mij = e.R.shape[0]
        ok = True
        for node, C, label in ((e.i, e.C_ij, "C_ij"), (e.j, e.C_ji, "C_ji")):
            if C.shape != (mij, network.dim(node)):
                out.append(Violation(
                    "dimension", where,
                    f"{label} has shape {C.shape}, want {(mij, network.dim(node))}",
                ))
                ok = False
        if e.z is not None and e.z.shape != (mij,):
            out.append(Violation("dimension", where, f"z has length {e.z.shape[0]}, want {mij}"))
        if ok:
            bad = _spd_problem(e.R)
            if bad:
                out.append(Violation("not_spd", where, bad))
    return ValidationReport(tuple(out))


# ----------------------------------------------------------------------------
# Graph metrics


class Unbounded:
    """Loop-free depth of a node whose whole connected component is acyclic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __reduce__(self):
        return (Unbounded, ())


UNBOUNDED = Unbounded()


def bfs_distances(network: SensorNetwork, root: int) -> dict[int, int]:
    """Hop distances from ``root`` to every node of its component."""
    if root not in network.nodes:
        raise KeyError(f"node {root} not in network")
    dist = {root: 0}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in network.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def neighborhood(network: SensorNetwork, root: int, radius: int) -> list[int]:
    """Nodes within ``radius`` hops of ``root``, ascending."""
    return sorted(i for i, d in bfs_distances(network, root).items() if d <= radius)


def loop_free_depth(network: SensorNetwork, root: int) -> int | Unbounded:
    """Largest ``l`` such that the induced subgraph on nodes within ``l`` hops of root is acyclic.

    Returns :data:`UNBOUNDED` when the whole component of ``root`` is acyclic.
    """
    dist = bfs_distances(network, root)
    ecc = max(dist.values())
    n_nodes = n_edges = 0
    by_level: dict[int, list[int]] = {}
    for i, d in dist.items():
        by_level.setdefault(d, []).append(i)
    for level in range(ecc + 1):
        for u in by_level[level]:
            n_nodes += 1
            n_edges += sum(1 for v in network.neighbors(u) if dist[v] < level
                           or (dist[v] == level and v < u))
        # a connected graph is a tree iff |E| = |V| - 1
        if n_edges != n_nodes - 1:
            return level - 1
    return UNBOUNDED


def clamp_depth(depth: int | Unbounded, network: SensorNetwork, root: int) -> int:
    """Finite stand-in for an unbounded depth: the eccentricity of ``root``."""
    if isinstance(depth, Unbounded):
        return max(bfs_distances(network, root).values())
    return depth


@dataclass(frozen=True)
class GraphStats:
    ubar: int
    nbar: int
    mbar: int
    diameter: int
    eccentricity: dict[int, int] = field(default_factory=dict)
    r1: dict[int, int] = field(default_factory=dict)


def graph_stats(network: SensorNetwork) -> GraphStats:
    """Degree/dimension maxima and BFS distance metrics of a connected network."""
    ecc = {}
    for i in network.nodes:
        dist = bfs_distances(network, i)
        if len(dist) != network.n_nodes:
            raise ValueError(f"network is disconnected (node {i} reaches {len(dist)} of {network.n_nodes})")
        ecc[i] = max(dist.values())
    ubar = max(0, max(network.degree(i) for i in network.nodes) - 1)
    nbar = max(network.dim(i) for i in network.nodes)
    mdims = [network.measurement(i).dim for i in network.nodes if network.has_measurement(i)]
    mdims += [e.dim for e in network.edges]
    return GraphStats(
        ubar=ubar,
        nbar=nbar,
        mbar=max(mdims) if mdims else 0,
        diameter=max(ecc.values()),
        eccentricity=ecc,
        r1={i: e + 1 for i, e in ecc.items()},
    )
