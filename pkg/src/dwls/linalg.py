"""Matrix tools: Riemannian distance on SPD matrices and block-tridiagonal inversion.

Everything here is a pure function of its numpy inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

EIG_CLAMP = 1e-14
SYM_RTOL = 1e-12


class NotSPDError(ValueError):
    """Raised when a matrix that must be symmetric positive definite is not."""


class SingularBlockError(np.linalg.LinAlgError):
    """A pivot block of a block-tridiagonal recursion could not be inverted."""


def sym(A: np.ndarray) -> np.ndarray:
    """Return the symmetric part (A + A^T) / 2."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def opnorm(A: np.ndarray) -> float:
    """Induced 2-norm (largest singular value). Empty matrices have norm 0."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False)[0])


def sigma_min(A: np.ndarray) -> float:
    """Smallest of the min(m, n) singular values, no thresholding."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(np.linalg.svd(A, compute_uv=False)[-1])


def check_spd(P: np.ndarray, name: str = "matrix") -> np.ndarray:
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NotSPDError(f"{name} must be square, got shape {P.shape}")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.T)) > SYM_RTOL * scale:
        raise NotSPDError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(sym(P))[0] <= 0.0:
        raise NotSPDError(f"{name} is not positive definite")
    return P


def is_psd(A: np.ndarray, tol: float = 1e-9) -> bool:
    """True when the smallest eigenvalue of sym(A) is >= -tol * max(1, |A|)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    scale = max(1.0, opnorm(A))
    return bool(np.linalg.eigvalsh(sym(A))[0] >= -tol * scale)


def psd_slack(A: np.ndarray) -> float:
    """Smallest eigenvalue of sym(A); nonnegative iff A is PSD."""
    return float(np.linalg.eigvalsh(sym(np.atleast_2d(A)))[0])


def sqrtm_psd(P: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a PSD matrix via eigh.

    Eigenvalues are clamped at ``EIG_CLAMP`` to absorb round-off drift.
    """
    w, V = np.linalg.eigh(sym(P))
    w = np.maximum(w, EIG_CLAMP)
    d = 1.0 / np.sqrt(w) if inverse else np.sqrt(w)
    return (V * d) @ V.T


def riemannian_distance(P: np.ndarray, Q: np.ndarray) -> float:
    r"""Riemannian distance between two SPD matrices.

    .. math::
        \delta(P, Q) = \sqrt{\sum_k \log^2 \sigma_k(P Q^{-1})}

    The singular values of :math:`PQ^{-1}` coincide with the eigenvalues of
    the congruent symmetric matrix :math:`Q^{-1/2} P Q^{-1/2}`, which is what
    gets decomposed here.

    Parameters
    ----------
    P, Q : ndarray, shape (n, n)
        Symmetric positive definite matrices.

    Returns
    -------
    d : float
        Nonnegative distance; zero iff ``P == Q``.
    """
    P = check_spd(P, "P")
    Q = check_spd(Q, "Q")
    if P.shape != Q.shape:
        raise ValueError(f"dimension mismatch: {P.shape} vs {Q.shape}")
    Qis = sqrtm_psd(Q, inverse=True)
    w = np.linalg.eigvalsh(sym(Qis @ P @ Qis))
    w = np.maximum(w, EIG_CLAMP)
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def chol_inv(A: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factor."""
    A = sym(A)
    c = sla.cho_factor(A, lower=True)
    return sym(sla.cho_solve(c, np.eye(A.shape[0])))


# ----------------------------------------------------------------------------
# Block-tridiagonal systems


@dataclass(frozen=True)
class BandedBlockSystem:
    """Symmetric block-tridiagonal system ``Q x = q``.

    ``diag_blocks[k]`` is Q_{k,k}; ``super_blocks[k]`` is Q_{k,k+1}
    (the sub-diagonal is its transpose); ``rhs_blocks[k]`` is q_k.
    """

    diag_blocks: tuple[np.ndarray, ...]
    super_blocks: tuple[np.ndarray, ...]
    rhs_blocks: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        n = len(self.diag_blocks)
        if n == 0:
            raise ValueError("system needs at least one block")
        if len(self.super_blocks) != n - 1:
            raise ValueError(
                f"{n} diagonal blocks need {n - 1} super-diagonal blocks, "
                f"got {len(self.super_blocks)}"
            )
        for k, D in enumerate(self.diag_blocks):
            if D.ndim != 2 or D.shape[0] != D.shape[1]:
                raise ValueError(f"diagonal block {k} is not square")
        for k, U in enumerate(self.super_blocks):
            want = (self.diag_blocks[k].shape[0], self.diag_blocks[k + 1].shape[0])
            if U.shape != want:
                raise ValueError(f"super block {k} has shape {U.shape}, want {want}")
        if self.rhs_blocks and len(self.rhs_blocks) != n:
            raise ValueError("rhs must have one block per diagonal block")

    @property
    def n_blocks(self) -> int:
        return len(self.diag_blocks)

    @property
    def sizes(self) -> list[int]:
        return [D.shape[0] for D in self.diag_blocks]

    def offsets(self) -> list[int]:
        return [0, *np.cumsum(self.sizes).tolist()]

    def dense(self) -> np.ndarray:
        off = self.offsets()
        Q = np.zeros((off[-1], off[-1]))
        for k, D in enumerate(self.diag_blocks):
            Q[off[k]:off[k + 1], off[k]:off[k + 1]] = D
        for k, U in enumerate(self.super_blocks):
            Q[off[k]:off[k + 1], off[k + 1]:off[k + 2]] = U
            Q[off[k + 1]:off[k + 2], off[k]:off[k + 1]] = U.T
        return Q

    def dense_rhs(self) -> np.ndarray:
        return np.concatenate([np.asarray(b, dtype=float) for b in self.rhs_blocks])


@dataclass(frozen=True)
class BandRecursion:
    """Forward pivots, backward pivots, marginal blocks and the first block row."""

    deltas: list[np.ndarray]
    gammas: list[np.ndarray]
    phis: list[np.ndarray]
    first_row: list[np.ndarray]


def _spd_inverse(A: np.ndarray, what: str) -> np.ndarray:
    try:
        return chol_inv(A)
    except np.linalg.LinAlgError as exc:
        raise SingularBlockError(f"{what} is not positive definite") from exc


def band_recursion(system: BandedBlockSystem) -> BandRecursion:
    """Run the forward/backward pivot recursions of a block-tridiagonal system.

    Forward pivots ``Delta_k = Q_kk - Q_{k,k-1} Delta_{k-1}^{-1} Q_{k-1,k}``,
    backward pivots ``Gamma_k = Q_kk - Q_{k,k+1} Gamma_{k+1}^{-1} Q_{k+1,k}``,
    marginals ``Phi_j = Gamma_j - Q_{j,j-1} Delta_{j-1}^{-1} Q_{j-1,j}`` and

        [Sigma]_{1,j} = prod_{k<j} (-Delta_k^{-1} Q_{k,k+1}) Phi_j^{-1}.
    """
    D = [sym(b) for b in system.diag_blocks]
    U = list(system.super_blocks)
    n = len(D)

    deltas, delta_inv = [D[0]], [_spd_inverse(D[0], "Delta_1")]
    for k in range(1, n):
        dk = sym(D[k] - U[k - 1].T @ delta_inv[k - 1] @ U[k - 1])
        deltas.append(dk)
        delta_inv.append(_spd_inverse(dk, f"Delta_{k + 1}"))

    gammas = [None] * n
    gammas[-1] = D[-1]
    gamma_inv = _spd_inverse(D[-1], f"Gamma_{n}")
    for k in range(n - 2, -1, -1):
        gammas[k] = sym(D[k] - U[k] @ gamma_inv @ U[k].T)
        gamma_inv = _spd_inverse(gammas[k], f"Gamma_{k + 1}")

    phis = [gammas[0]]
    for j in range(1, n):
        phis.append(sym(gammas[j] - U[j - 1].T @ delta_inv[j - 1] @ U[j - 1]))

    first_row = []
    prefix = np.eye(D[0].shape[0])
    for j in range(n):
        first_row.append(prefix @ _spd_inverse(phis[j], f"Phi_{j + 1}"))
        if j < n - 1:
            prefix = -prefix @ delta_inv[j] @ U[j]
    return BandRecursion(deltas, gammas, phis, first_row)


def first_block_row_inverse(system: BandedBlockSystem) -> list[np.ndarray]:
    """First block row ``[Sigma]_{1,j}`` of the inverse of a block-tridiagonal SPD matrix."""
    return band_recursion(system).first_row


def solve_first_block(system: BandedBlockSystem) -> tuple[np.ndarray, np.ndarray]:
    """First block of the solution of ``Q x = q`` and the (1,1) block of ``Q^{-1}``."""
    if not system.rhs_blocks:
        raise ValueError("system has no right-hand side")
    row = first_block_row_inverse(system)
    x1 = sum(S @ np.asarray(q, dtype=float) for S, q in zip(row, system.rhs_blocks))
    return np.asarray(x1), sym(row[0])


# ----------------------------------------------------------------------------
# Decay of banded inverses and small scalar facts


def _band_constants(a: float, b: float, m: int) -> tuple[float, float]:
    if not a > 0:
        raise ValueError(f"lower spectral bound must be positive, got {a}")
    if b < a:
        raise ValueError(f"upper spectral bound {b} is below lower bound {a}")
    if m < 1:
        raise ValueError(f"bandwidth must be >= 1, got {m}")
    r = b / a
    q = (math.sqrt(r) - 1.0) / (math.sqrt(r) + 1.0)
    return r, q ** (2.0 / m)


def banded_decay_bound(a: float, b: float, m: int, offset: int) -> float:
    """Block-decay envelope ``c * lam**offset`` for the inverse of an m-banded matrix.

    ``c = (r - 1) / (2 b)``, ``lam = ((sqrt(r) - 1) / (sqrt(r) + 1))**(2/m)``,
    ``r = b / a`` where ``a <= spectrum <= b``.

    This constant undershoots the true envelope by
    one factor of ``(sqrt(r) - 1) / (sqrt(r) + 1)`` and is not a valid bound
    on the diagonal blocks; use :func:`demko_decay_bound` when a guaranteed
    bound is needed.
    """
    r, lam = _band_constants(a, b, m)
    return (r - 1.0) / (2.0 * b) * lam ** abs(offset)


def demko_decay_bound(a: float, b: float, m: int, offset: int) -> float:
    """Guaranteed decay bound ``C * lam**offset`` with ``C = max(1/a, (1+sqrt(r))^2/(2b))``."""
    r, lam = _band_constants(a, b, m)
    C = max(1.0 / a, (1.0 + math.sqrt(r)) ** 2 / (2.0 * b))
    return C * lam ** abs(offset)


def exp_gap(x: float, y: float) -> bool:
    """Check ``e^{xy} - 1 <= (e^x - 1) y`` for ``0 <= y <= 1``."""
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    lhs = math.expm1(x * y)
    rhs = math.expm1(x) * y
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def offdiag_norm_bound(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> bool:
    """Check ``||B|| <= sqrt(||A|| ||C||)`` for a PSD matrix ``[[A, B^T], [B, C]]``."""
    lhs = opnorm(B)
    rhs = math.sqrt(opnorm(A) * opnorm(C))
    return lhs <= rhs * (1.0 + 1e-10) + 1e-14


def partition_psd(M: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split ``M`` into the (A, B, C) blocks of ``[[A, B^T], [B, C]]`` at index k."""
    return M[:k, :k], M[k:, :k], M[k:, k:]


def block_norms(A: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Matrix of operator norms of the blocks of ``A`` under a block partition."""
    off = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    n = len(sizes)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = opnorm(A[off[i]:off[i + 1], off[j]:off[j + 1]])
    return out
