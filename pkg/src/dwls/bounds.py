"""Explicit accuracy constants and bounds at a probe node.

Two reports are produced:

* :class:`CovBoundReport`: bound on ``||Cov_WLS - Q_1^{-1}(N)||`` for all
  ``N >= l1 + 1``, of the form ``varpi_cov * rho**l1``.
* :class:`EstBoundReport`: bound on ``||x_1(N) - x_1_WLS||`` for all
  ``N >= l1 + 1``, of the form ``varpi_est * kappa**(l1 + 1)``.

All maxima/minima run over every node and every edge of the network, so
only the loop-free depth ``l1`` depends on the probe.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .linalg import opnorm, sigma_min
from .network import SensorNetwork, Unbounded, graph_stats, loop_free_depth


def _depth_json(l1):
    return "unbounded" if isinstance(l1, Unbounded) else l1


class _Report:
    def to_dict(self) -> dict:
        d = asdict(self)
        d["l1"] = _depth_json(self.l1)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


@dataclass(frozen=True)
class CovBoundReport(_Report):
    probe: int
    ubar: int
    nbar: int
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    lambda_: float
    rho: float
    delta_bar: float
    varpi_cov: float
    l1: int | Unbounded
    bound: float
    applicable: bool
    exact: bool = False
    reason: str = ""

    @property
    def varpi_explicit(self) -> float:
        return self.varpi_cov

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["lambda"] = d.pop("lambda_")
        d["varpi_explicit"] = d["varpi_cov"]
        return d


@dataclass(frozen=True)
class EstBoundReport(_Report):
    probe: int
    ubar: int
    nbar: int
    mbar: int
    r1: int
    a1: float
    a2: float
    b1: float
    b2: float
    omega: float
    iota: float
    zeta: float
    kappa: float
    q_over: float
    q_under: float
    r_over: float
    r_under: float
    eps_over: float
    eps_under: float
    xi_bar: float
    z_bar: float
    psi_bar: float
    eta_bar: float
    c: float
    chi_bar: float
    psi_check: float
    eta_check: float
    zeta_check: float
    chi_bar_check: float
    kappa_check: float
    varpi_est: float
    l1: int | Unbounded
    bound: float
    applicable: bool
    exact: bool = False
    reason: str = ""

    @property
    def varpi_explicit(self) -> float:
        return self.varpi_est


# ----------------------------------------------------------------------------
# Network-wide ingredients


@dataclass(frozen=True)
class _Ingredients:
    ubar: int
    nbar: int
    mbar: int
    r1: dict
    self_info: dict = field(repr=False)
    joint_info: dict = field(repr=False)  # (i, j) -> C_{i,j}^T R^-1 C_{i,j}


def _ingredients(network: SensorNetwork) -> _Ingredients:
    st = graph_stats(network)
    self_info = {i: network.self_information(i) for i in network.nodes}
    joint_info = {(i, j): network.joint_information(i, j) for i, j in network.directed_edges()}
    return _Ingredients(st.ubar, st.nbar, st.mbar, st.r1, self_info, joint_info)


def _xi_bar(network: SensorNetwork, ing: _Ingredients) -> float:
    """max_i log|| I + (sum_j C_ij^T R_ij^-1 C_ij)(C_i^T R_i^-1 C_i)^-1 ||."""
    worst = 0.0
    for i in network.nodes:
        n = network.dim(i)
        S = sum((ing.joint_info[(i, j)] for j in network.neighbors(i)), np.zeros((n, n)))
        M = np.eye(n) + S @ np.linalg.inv(ing.self_info[i])
        worst = max(worst, math.log(opnorm(M)))
    return worst


def _ratio(a: float, b: float) -> float:
    return a / (a + b) if a > 0 else 0.0


def _pow(base: float, exp: int) -> float:
    return 1.0 if exp == 0 else base ** exp


def covariance_bound(network: SensorNetwork, probe: int, _ing: _Ingredients | None = None) -> CovBoundReport:
    """Constants of the covariance accuracy bound at ``probe``."""
    ing = _ing or _ingredients(network)
    ubar = ing.ubar
    edges = network.directed_edges()
    alpha1 = ubar * max((opnorm(ing.joint_info[k]) for k in edges), default=0.0)
    beta1 = min(sigma_min(ing.self_info[i]) for i in network.nodes)
    alpha2 = 0.0
    for i, j in edges:
        C = network.joint_coef(i, j)
        alpha2 = max(alpha2, opnorm(C @ np.linalg.solve(ing.self_info[i], C.T)))
    beta2 = min((sigma_min(e.R) for e in network.edges), default=math.inf)
    lam = _ratio(alpha1, beta1) * (_ratio(alpha2, beta2) if math.isfinite(beta2) else 0.0)
    rho = lam * math.sqrt(ubar)
    delta_bar = math.sqrt((ubar + 1) * ing.nbar) * _xi_bar(network, ing)
    varpi = math.expm1(delta_bar) / beta1

    l1 = loop_free_depth(network, probe)
    exact, reason = False, ""
    if isinstance(l1, Unbounded):
        bound, exact, reason = 0.0, True, "component of probe is acyclic"
    elif ubar == 0:
        bound, exact, reason = 0.0, True, "all degrees <= 1"
    else:
        bound = varpi * _pow(rho, l1)
    applicable = exact or rho < 1.0
    if not applicable:
        reason = f"rho = {rho:.6g} >= 1"
    return CovBoundReport(
        probe=probe, ubar=ubar, nbar=ing.nbar,
        alpha1=alpha1, beta1=beta1, alpha2=alpha2, beta2=beta2,
        lambda_=lam, rho=rho, delta_bar=delta_bar, varpi_cov=varpi,
        l1=l1, bound=bound, applicable=applicable, exact=exact, reason=reason,
    )


def _zeta(q_ratio: float, w: float) -> float:
    """2 + log base 1/sqrt(w) of q_ratio; nan when w is 0 or 1."""
    if not 0.0 < w < 1.0:
        return math.nan
    return 2.0 + math.log(q_ratio) / (0.5 * math.log(1.0 / w))


def _kappa(ubar: int, w: float, iota: float, zeta: float) -> float:
    if ubar == 0:
        return 0.0
    if math.isnan(zeta):
        return math.nan
    return max(ubar * math.sqrt(w), math.sqrt(ubar) * iota ** (1.0 / zeta))


def estimate_bound(network: SensorNetwork, probe: int, _ing: _Ingredients | None = None,
                   _cov: CovBoundReport | None = None) -> EstBoundReport:
    """Constants of the estimate accuracy bound at ``probe``.

    Requires sampled measurements (the bound scales with the largest
    measurement entry).
    """
    if not network.is_sampled:
        raise ValueError("estimate bound needs sampled measurements")
    ing = _ing or _ingredients(network)
    cov = _cov or covariance_bound(network, probe, ing)
    ubar, nbar, mbar = ing.ubar, ing.nbar, ing.mbar
    nodes, edges = network.nodes, network.edges

    Rs = [network.measurement(i).R for i in nodes] + [e.R for e in edges]
    r_over = max(opnorm(R) for R in Rs)
    r_under = min(sigma_min(R) for R in Rs)
    eps_under = min(sigma_min(network.measurement(i).C) for i in nodes)
    cij_sq = max((opnorm(network.joint_coef(i, j)) ** 2 for i, j in network.directed_edges()),
                 default=0.0)
    ci_sq = max(opnorm(network.measurement(i).C) ** 2 for i in nodes)
    eps_over = math.sqrt(ci_sq + 4 * ubar * cij_sq)

    a1 = ubar * cij_sq / r_under
    a2 = cij_sq * ubar * r_over / eps_under ** 2
    b1 = eps_under ** 2 / r_over
    b2 = r_under
    omega = _ratio(a1, b1) * _ratio(a2, b2)

    q_over = eps_over ** 2 / r_under
    q_under = eps_under ** 2 / r_over
    sq_o, sq_u = math.sqrt(q_over), math.sqrt(q_under)
    iota = (sq_o - sq_u) / (sq_o + sq_u)
    # (q_over - q_under) / (2 q_over q_under iota), written without the 0/0 at iota = 0
    c = (sq_o + sq_u) ** 2 / (2.0 * q_over * q_under)
    zeta = _zeta(q_over / q_under, omega)
    kappa = _kappa(ubar, omega, iota, zeta)

    xi_bar = _xi_bar(network, ing)
    z_bar = max(
        [float(np.max(np.abs(network.measurement(i).z))) for i in nodes]
        + [float(np.max(np.abs(e.z))) for e in edges]
    )
    psi_bar = math.expm1(xi_bar * (ubar + 1) * math.sqrt(nbar))
    eta_bar = eps_over * z_bar * (ubar + 1) * math.sqrt(8 * mbar) / r_under
    psi_check = math.expm1(xi_bar * math.sqrt(nbar * (ubar + 1)))
    eta_check = eps_over * z_bar * math.sqrt(8 * mbar * (ubar + 1)) / r_under
    lam = cov.lambda_
    zeta_check = _zeta(q_over / q_under, lam)
    kappa_check = _kappa(ubar, lam, iota, zeta_check)

    dq = q_over - q_under

    def chi(psi, eta, w):
        first = psi * eta / (dq * w) if dq > 0 and w > 0 else math.nan
        return first + 2.0 * eta * c / (1.0 - iota)

    chi_bar = chi(psi_bar, eta_bar, omega)
    chi_bar_check = chi(psi_check, eta_check, lam)

    l1 = cov.l1
    r1 = ing.r1[probe]
    exact, reason = False, ""
    if isinstance(l1, Unbounded):
        exact, reason = True, "component of probe is acyclic"
    elif ubar == 0:
        exact, reason = True, "all degrees <= 1"
    elif not 0.0 < omega < 1.0:
        reason = f"omega = {omega:.6g} is degenerate (zeta undefined)"
    elif dq <= 0:
        reason = "q_over == q_under (chi undefined)"
    elif not kappa < 1.0:
        reason = f"kappa = {kappa:.6g} >= 1"

    if exact:
        varpi, bound, applicable = 0.0, 0.0, True
    elif reason:
        varpi = 2.0 * chi_bar / (1.0 - kappa) if kappa < 1.0 else math.nan
        bound, applicable = math.nan, False
    else:
        varpi = 2.0 * chi_bar / (1.0 - kappa)
        bound, applicable = varpi * kappa ** (l1 + 1), True

    return EstBoundReport(
        probe=probe, ubar=ubar, nbar=nbar, mbar=mbar, r1=r1,
        a1=a1, a2=a2, b1=b1, b2=b2, omega=omega, iota=iota, zeta=zeta, kappa=kappa,
        q_over=q_over, q_under=q_under, r_over=r_over, r_under=r_under,
        eps_over=eps_over, eps_under=eps_under,
        xi_bar=xi_bar, z_bar=z_bar, psi_bar=psi_bar, eta_bar=eta_bar, c=c,
        chi_bar=chi_bar, psi_check=psi_check, eta_check=eta_check,
        zeta_check=zeta_check, chi_bar_check=chi_bar_check, kappa_check=kappa_check,
        varpi_est=varpi, l1=l1, bound=bound, applicable=applicable,
        exact=exact, reason=reason,
    )


@dataclass(frozen=True)
class IncrementBounds:
    """Per-round increment bounds, index ``N - 1`` holds the bound for round ``N``.

    ``dwls[N-1]`` bounds ``||x_1(N+1) - x_1(N)||``; ``restricted[N-1]`` bounds
    ``||x_1_WLS(N+1) - x_1_WLS(N)||`` for the neighbourhood-restricted WLS.
    """

    dwls: np.ndarray
    restricted: np.ndarray
    applicable: bool
    reason: str = ""


def increment_bounds(network: SensorNetwork, probe: int, rounds: int,
                     report: EstBoundReport | None = None) -> IncrementBounds:
    """Geometric increment bounds ``chi_check * kappa_check**N`` and ``chi * kappa**N`` (cut at r1)."""
    rep = report or estimate_bound(network, probe)
    N = np.arange(1, rounds + 1)
    if rep.ubar == 0:
        return IncrementBounds(np.zeros(rounds), np.zeros(rounds), True, "all degrees <= 1")
    decoupled = rep.a1 == 0.0
    if decoupled:
        # no joint information: every round after the first repeats the local solve
        return IncrementBounds(np.zeros(rounds), np.zeros(rounds), True, "no coupling")
    ok = math.isfinite(rep.kappa_check) and rep.kappa_check < 1.0
    dwls = rep.chi_bar_check * rep.kappa_check ** N if ok else np.full(rounds, np.nan)
    ok_r = math.isfinite(rep.kappa) and rep.kappa < 1.0
    restricted = np.where(N <= rep.r1, rep.chi_bar * rep.kappa ** N if ok_r else np.nan, 0.0)
    reason = "" if ok else f"kappa_check = {rep.kappa_check:.6g} is not below 1"
    return IncrementBounds(dwls, restricted, ok, reason)


def network_bounds(network: SensorNetwork, probes=None, sampled: bool = True):
    """Reports for several probes sharing one pass over the network-wide constants."""
    ing = _ingredients(network)
    out = {}
    for p in (network.nodes if probes is None else probes):
        cov = covariance_bound(network, p, ing)
        est = estimate_bound(network, p, ing, cov) if sampled else None
        out[p] = (cov, est)
    return out
