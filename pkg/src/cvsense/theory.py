"""Closed-form sensitivities and optimal probes for the joint-quadrature estimator.

Sensitivity is the error-propagation figure
``sigma = sqrt(Var P_avg) / |d<P_avg>/d phi_avg|`` with
``P_avg = sum_j p_j / M``, evaluated for small phase shifts.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import gaussian as g
from .network import SchemeParams, derive_alpha_r, sense


@dataclass(frozen=True)
class SensitivityReport:
    sigma: float
    slope: float
    noise_var: float
    N_coh: float
    N_sqz: float
    sigma_err: float = 0.0
    unstable: bool = False

    @property
    def resolvable_deg(self) -> float:
        return float(np.degrees(self.sigma))

    def as_dict(self) -> dict:
        out = asdict(self)
        out["resolvable_deg"] = self.resolvable_deg
        return out


@dataclass(frozen=True)
class OptimalPoint:
    r_opt: float
    alpha_opt: float
    mu_opt: float
    sigma_opt: float
    Lambda: float
    kind: str
    M: int
    N: float
    eta: float

    @property
    def params(self) -> SchemeParams:
        return SchemeParams(M=self.M, N=self.N, eta=self.eta, mu=self.mu_opt, kind=self.kind)

    @property
    def squeezing_degree(self) -> float:
        """Measured phase-quadrature noise ``eta e^{-2r} + 1 - eta`` in shot-noise units."""
        return self.eta * np.exp(-2 * self.r_opt) + 1 - self.eta

    def as_dict(self) -> dict:
        out = asdict(self)
        out["squeezing_degree"] = self.squeezing_degree
        return out


def _check(alpha, eta):
    if not alpha > 0:
        raise ValueError("displacement alpha must be positive: the estimator slope vanishes")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")


def sigma_separable(alpha: float, r: float, eta: float, M: int) -> float:
    _check(alpha, eta)
    return float(np.sqrt(np.exp(-2 * r) + 1 / eta - 1) / (2 * alpha * np.sqrt(M)))


def sigma_entangled(alpha: float, r: float, eta: float) -> float:
    _check(alpha, eta)
    return float(np.sqrt(np.exp(-2 * r) + 1 / eta - 1) / (2 * alpha))


def sigma_for(params: SchemeParams) -> float:
    alpha, r = derive_alpha_r(params)
    if params.kind == "entangled":
        return sigma_entangled(alpha, r, params.eta)
    return sigma_separable(alpha, r, params.eta, params.M)


def sensitivity_report(params: SchemeParams) -> SensitivityReport:
    alpha, r = derive_alpha_r(params)
    eta, M = params.eta, params.M
    noise_var = (eta * np.exp(-2 * r) + 1 - eta) / (2 * M)
    scale = np.sqrt(2 * eta / M) if params.kind == "entangled" else np.sqrt(2 * eta)
    slope = scale * alpha
    return SensitivityReport(
        sigma=sigma_for(params),
        slope=float(slope),
        noise_var=float(noise_var),
        N_coh=params.N_coh,
        N_sqz=params.N_sqz,
    )


def estimator_moments(state: g.GaussianState) -> tuple[float, float, float]:
    """Mean, variance and phase slope of ``P_avg`` for a sensed state.

    The slope uses ``d p_j / d phi_j = x_j`` for a common shift of all
    node phases, so it is exact rather than a finite difference.
    """
    M = state.n_modes
    mean = float(np.mean(state.mean[1::2]))
    var = float(state.cov[1::2, 1::2].sum() / M**2)
    slope = float(np.mean(state.mean[0::2]))
    return mean, var, slope


def sigma_from_state(params: SchemeParams, phi0: float = 0.0) -> float:
    """Sensitivity assembled from the moments of the sensed Gaussian state."""
    state = sense(params, np.full(params.M, phi0))
    _, var, slope = estimator_moments(state)
    if slope == 0:
        raise ValueError("zero estimator slope")
    return float(np.sqrt(var) / abs(slope))


def optimal_point(M: int, N: float, eta: float, kind: str = "entangled") -> OptimalPoint:
    """Photon split that minimises sigma at fixed photons per sample.

    With ``K = M N`` (entangled) or ``K = N`` (separable) and
    ``Lambda = sqrt(1 + 4 K (1 - eta))`` the optimum squeezing obeys
    ``e^{2r} = (Lambda - eta) / (1 - eta)``, evaluated here as
    ``1 + 4 K / (Lambda + 1)`` which stays finite at ``eta = 1``.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"number of modes must be a positive integer, got {M}")
    if not N > 0:
        raise ValueError(f"photon number must be positive, got {N}")
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if kind not in ("separable", "entangled"):
        raise ValueError(f"unknown scheme kind {kind!r}")
    K = M * N if kind == "entangled" else N
    if eta == 1.0:
        lam = 1.0
        e2r = 1.0 + 2 * K
        sinh2 = K**2 / (1 + 2 * K)
        sigma = np.sqrt(K / (K + 1)) / (2 * K)
    else:
        lam = np.sqrt(1 + 4 * K * (1 - eta))
        e2r = 1.0 + 4 * K / (lam + 1)
        sinh2 = (e2r + 1 / e2r - 2) / 4
        sigma = np.sqrt((K * (1 - eta) + eta * (lam + 1) / 2) / (1 + eta / K)) / (2 * K)
    if kind == "separable":
        sigma /= np.sqrt(M)
    total = K / eta
    alpha2 = total - sinh2
    return OptimalPoint(
        r_opt=float(0.5 * np.log(e2r)),
        alpha_opt=float(np.sqrt(alpha2)),
        mu_opt=float(sinh2 / total),
        sigma_opt=float(sigma),
        Lambda=float(lam),
        kind=kind,
        M=int(M),
        N=float(N),
        eta=float(eta),
    )


def optimal_sigma(M: int, N: float, eta: float, kind: str = "entangled") -> float:
    return optimal_point(M, N, eta, kind).sigma_opt


def gain(M: int, N: float, eta: float) -> float:
    """Sensitivity gain of the entangled network over separable probes."""
    return optimal_sigma(M, N, eta, "separable") / optimal_sigma(M, N, eta, "entangled")


def standard_quantum_limit(M: int, N: float) -> float:
    """Coherent-state sensitivity ``1 / (2 sqrt(M N))`` at ``N`` photons per sample."""
    if not N > 0:
        raise ValueError(f"photon number must be positive, got {N}")
    return float(1.0 / (2.0 * np.sqrt(M * N)))


def small_angle_bound(r: float) -> float:
    """Phase scale (rad) below which the linearised estimator holds.

    Both schemes need ``phi << e^{-2r}``; apply a safety margin on top.
    """
    if r < 0:
        raise ValueError("squeezing parameter must be non-negative")
    return float(np.exp(-2 * r))


def sigma_vs_mu(M: int, N: float, eta: float, kind: str, mus) -> np.ndarray:
    """Sensitivity along a grid of photon splits; ``inf`` where ``alpha = 0``."""
    mus = np.asarray(mus, dtype=float)
    K = M * N if kind == "entangled" else N
    total = K / eta
    sinh2 = mus * total
    alpha2 = total - sinh2
    e2r = (np.sqrt(sinh2) + np.sqrt(sinh2 + 1)) ** 2
    with np.errstate(divide="ignore"):
        sigma = np.sqrt(1 / e2r + 1 / eta - 1) / (2 * np.sqrt(alpha2))
    if kind == "separable":
        sigma = sigma / np.sqrt(M)
    return np.where(alpha2 > 0, sigma, np.inf)


def gain_curve_rows(Ms, Ns, etas) -> list[dict]:
    rows = []
    for eta in etas:
        for M in Ms:
            for N in Ns:
                s = optimal_sigma(M, N, eta, "separable")
                e = optimal_sigma(M, N, eta, "entangled")
                rows.append(
                    {"M": int(M), "N": float(N), "eta": float(eta),
                     "mu_sep": optimal_point(M, N, eta, "separable").mu_opt,
                     "mu_ent": optimal_point(M, N, eta, "entangled").mu_opt,
                     "sigma_sep": s, "sigma_ent": e, "gain": s / e}
                )
    return rows


# -- sideband voltages ------------------------------------------------------
#
# The spectrum analyser sees the normalised joint quadrature sum_j p_j / sqrt(M)
# (a single p for a separable channel). With shot-noise voltage V_sn its peak
# splits into a signal part k |sin(phi + theta1)| and a noise part
# sqrt(k_sq^2 cos^2(phi + theta2) + k_asq^2 sin^2(phi + theta2)).


def signal_voltage(phi, k: float, theta1: float = 0.0):
    return k * np.abs(np.sin(np.asarray(phi) + theta1))


def noise_voltage(phi, k_sq: float, k_asq: float, theta2: float = 0.0):
    arg = np.asarray(phi) + theta2
    return np.sqrt((k_sq * np.cos(arg)) ** 2 + (k_asq * np.sin(arg)) ** 2)


def voltage_amplitudes(params: SchemeParams, V_sn: float = 1.0) -> tuple[float, float, float]:
    """``(k, k_sq, k_asq)`` for one scheme; separable values refer to a single channel."""
    alpha, r = derive_alpha_r(params)
    eta = params.eta
    k = 2 * V_sn * np.sqrt(eta) * alpha
    k_sq = V_sn * np.sqrt(eta * np.exp(-2 * r) + 1 - eta)
    k_asq = V_sn * np.sqrt(eta * np.exp(2 * r) + 1 - eta)
    return float(k), float(k_sq), float(k_asq)


def sigma_from_voltages(k, k_sq, k_asq, theta1=0.0, theta2=0.0) -> float:
    """``V_n(0) / V_s'(0)``; ``V_sn`` cancels in the ratio."""
    return float(noise_voltage(0.0, k_sq, k_asq, theta2) / (k * np.cos(theta1)))
