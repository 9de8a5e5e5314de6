"""Synchronous-round distributed WLS message passing.

Each round every node folds the previous round's incoming messages into its
information pair (alpha_i, Q_i), and then sends each neighbour a message
built from everything it knows except what that neighbour told it.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import linalg as sla

from .linalg import psd_slack, sym
from .network import SensorNetwork

PIVOT_TOL = 1e-12
ADMISSIBLE_TOL = 1e-9

DirectedEdge = tuple[int, int]  # (sender, receiver)


class SingularityError(np.linalg.LinAlgError):
    """``Q_i(N) - Q_{j->i}(N-1)`` is not positive definite on some directed edge."""

    def __init__(self, sender: int, receiver: int, round_: int, reason: str = ""):
        self.edge = (sender, receiver)
        self.round = round_
        msg = (f"Q_{sender}({round_}) minus the message from {receiver} is singular "
               f"while forming message {sender}->{receiver}")
        super().__init__(msg + (f": {reason}" if reason else ""))


class AdmissibilityWarning(UserWarning):
    """An initial message lies outside ``0 <= Q0 <= C_ij^T R_ij^-1 C_ij``."""


@dataclass(frozen=True, eq=False)
class Message:
    """Information pair sent along one directed edge."""

    alpha: np.ndarray
    Q: np.ndarray


@dataclass(frozen=True, eq=False)
class NodeBelief:
    alpha: np.ndarray
    Q: np.ndarray
    x_hat: np.ndarray
    Sigma: np.ndarray


@dataclass(frozen=True)
class InitSet:
    """Initial messages ``(alpha_{j->i}(0), Q_{j->i}(0))`` keyed by ``(sender, receiver)``.

    Missing alpha entries default to zero vectors.
    """

    Q: Mapping[DirectedEdge, np.ndarray]
    alpha: Mapping[DirectedEdge, np.ndarray] = field(default_factory=dict)

    def messages(self, network: SensorNetwork) -> dict[DirectedEdge, Message]:
        out = {}
        for key in network.directed_edges():
            if key not in self.Q:
                raise KeyError(f"init set has no entry for directed edge {key}")
            n = network.dim(key[1])
            Q0 = sym(np.atleast_2d(np.asarray(self.Q[key], dtype=float)))
            if Q0.shape != (n, n):
                raise ValueError(f"init entry {key} has shape {Q0.shape}, want {(n, n)}")
            a0 = np.asarray(self.alpha.get(key, np.zeros(n)), dtype=float).reshape(n)
            out[key] = Message(a0, Q0)
        return out

    def check_admissible(self, network: SensorNetwork, tol: float = ADMISSIBLE_TOL) -> list[DirectedEdge]:
        """Directed edges whose entry violates ``0 <= Q0 <= C^T R^-1 C`` (receiver side)."""
        bad = []
        for key in network.directed_edges():
            sender, receiver = key
            Q0 = np.atleast_2d(np.asarray(self.Q[key], dtype=float))
            cap = network.joint_information(receiver, sender)
            scale = max(1.0, float(np.abs(cap).max()))
            if psd_slack(Q0) < -tol * scale or psd_slack(cap - Q0) < -tol * scale:
                bad.append(key)
        return bad


def standard_inits(network: SensorNetwork) -> tuple[InitSet, InitSet]:
    """The all-zero initialisation and the maximal one ``C_{i,j}^T R_{i,j}^{-1} C_{i,j}``."""
    zero, top = {}, {}
    for sender, receiver in network.directed_edges():
        n = network.dim(receiver)
        zero[(sender, receiver)] = np.zeros((n, n))
        top[(sender, receiver)] = sym(network.joint_information(receiver, sender))
    return InitSet(zero), InitSet(top)


def _chol_inverse(S: np.ndarray) -> np.ndarray | None:
    """Inverse of SPD ``S`` or None when a Cholesky pivot is <= PIVOT_TOL."""
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None
    scale = max(1.0, float(np.abs(S).max()))
    if np.min(np.diag(L)) ** 2 <= PIVOT_TOL * scale:
        return None
    Linv = sla.solve_triangular(L, np.eye(S.shape[0]), lower=True)
    return sym(Linv.T @ Linv)


def _self_terms(network: SensorNetwork) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    out = {}
    for i in network.nodes:
        m = network.measurement(i)
        RinvC = np.linalg.solve(m.R, m.C)
        out[i] = (RinvC.T @ m.z, sym(m.C.T @ RinvC))
    return out


def step(
    network: SensorNetwork,
    prev_messages: Mapping[DirectedEdge, Message],
    round_: int,
    _self: Mapping[int, tuple[np.ndarray, np.ndarray]] | None = None,
) -> tuple[dict[int, NodeBelief], dict[DirectedEdge, Message]]:
    """One synchronous round.

    Parameters
    ----------
    prev_messages : mapping (sender, receiver) -> Message
        Messages of round ``round_ - 1``; one per directed edge.
    round_ : int
        Index of the round being computed (only used in error messages).

    Returns
    -------
    beliefs : dict node -> NodeBelief
    messages : dict (sender, receiver) -> Message
    """
    if not network.is_sampled:
        raise ValueError("all self and joint measurements must be sampled before running")
    terms = _self_terms(network) if _self is None else _self

    beliefs = {}
    for i in network.nodes:
        a, Q = terms[i]
        a, Q = a.copy(), Q.copy()
        for j in network.neighbors(i):  # ascending, for reproducible sums
            m = prev_messages[(j, i)]
            a += m.alpha
            Q += m.Q
        Q = sym(Q)
        Sigma = _chol_inverse(Q)
        if Sigma is None:
            raise SingularityError(i, i, round_, "node information matrix is singular")
        beliefs[i] = NodeBelief(a, Q, Sigma @ a, Sigma)

    messages = {}
    for i, j in network.directed_edges():
        inc = prev_messages[(j, i)]
        b = beliefs[i]
        Sinv = _chol_inverse(sym(b.Q - inc.Q))
        if Sinv is None:
            raise SingularityError(i, j, round_)
        e = network.edge(i, j)
        Cij, Cji = e.coef(i), e.coef(j)
        R_out = sym(e.R + Cij @ Sinv @ Cij.T)
        z_out = e.z - Cij @ (Sinv @ (b.alpha - inc.alpha))
        RinvC = np.linalg.solve(R_out, Cji)
        messages[(i, j)] = Message(RinvC.T @ z_out, sym(Cji.T @ RinvC))
    return beliefs, messages


@dataclass
class Trajectory:
    """Beliefs for rounds 1..N and messages for rounds 0..N."""

    beliefs: dict[int, dict[int, NodeBelief]]
    messages: dict[int, dict[DirectedEdge, Message]]

    @property
    def rounds(self) -> int:
        return max(self.beliefs)

    def belief(self, round_: int, node: int) -> NodeBelief:
        return self.beliefs[round_][node]

    def stacked_estimate(self, round_: int, nodes=None) -> np.ndarray:
        b = self.beliefs[round_]
        return np.concatenate([b[i].x_hat for i in (sorted(b) if nodes is None else nodes)])

    def mismatch_rows(self, x_ref: Mapping[int, np.ndarray], cov_ref: Mapping[int, np.ndarray]):
        """Rows ``(round, node, ||x_hat - x_ref||, ||Sigma - cov_ref||)`` with 2-norms."""
        for r in sorted(self.beliefs):
            for i, b in sorted(self.beliefs[r].items()):
                yield (r, i,
                       float(np.linalg.norm(b.x_hat - x_ref[i])),
                       float(np.linalg.norm(b.Sigma - cov_ref[i], 2)))

    def to_csv(self, path: str | Path, x_ref, cov_ref) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "node", "mismatch_x", "mismatch_cov"])
            for r, i, mx, mc in self.mismatch_rows(x_ref, cov_ref):
                w.writerow([r, i, repr(mx), repr(mc)])


def run(network: SensorNetwork, init: InitSet | None = None, rounds: int = 1,
        check_admissible: bool = True) -> Trajectory:
    """Run ``rounds`` synchronous rounds from ``init`` (default: all-zero messages)."""
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if init is None:
        init = standard_inits(network)[0]
    elif check_admissible:
        bad = init.check_admissible(network)
        if bad:
            warnings.warn(
                f"{len(bad)} initial message(s) outside the admissible range, e.g. {bad[0]}",
                AdmissibilityWarning, stacklevel=2,
            )
    msgs = init.messages(network)
    terms = _self_terms(network) if network.is_sampled else None
    traj = Trajectory({}, {0: msgs})
    for N in range(1, rounds + 1):
        beliefs, msgs = step(network, msgs, N, terms)
        traj.beliefs[N] = beliefs
        traj.messages[N] = msgs
    return traj
