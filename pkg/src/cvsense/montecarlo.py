"""Stochastic oracles: homodyne sampling and synthetic sideband spectra.

Every random draw descends from a single integer seed through
:class:`numpy.random.SeedSequence`, so a given ``(seed, lanes)`` pair
always reproduces the same samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gaussian as g
from .network import SchemeParams, sense
from .theory import (
    SensitivityReport,
    noise_voltage,
    sigma_from_voltages,
    signal_voltage,
    small_angle_bound,
    voltage_amplitudes,
)

# relative standard error of the slope above which a report is flagged
UNSTABLE_SLOPE_REL = 0.1


@dataclass(frozen=True)
class ShotRecord:
    samples: np.ndarray
    phi_true: np.ndarray
    seed: int

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a K x M matrix")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite samples")

    @property
    def p_avg(self) -> np.ndarray:
        """Per-shot estimator ``sum_j p_j / M``."""
        return self.samples.mean(axis=1)


def _lane_sizes(K: int, lanes: int) -> list[int]:
    base, extra = divmod(K, lanes)
    return [base + (i < extra) for i in range(lanes)]


def sample_homodyne(
    state: g.GaussianState,
    K: int,
    seed: int,
    lanes: int = 1,
    phi_true=None,
) -> ShotRecord:
    """Draw ``K`` joint phase-quadrature outcomes of every mode of ``state``.

    Lane ``i`` uses the ``i``-th child of ``SeedSequence(seed)``; lanes are
    concatenated in index order.
    """
    if K < 1:
        raise ValueError(f"need at least one shot, got K={K}")
    if lanes < 1:
        raise ValueError("lanes must be positive")
    mean = state.mean[1::2]
    cov = state.cov[1::2, 1::2]
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-10 * max(1.0, w.max()):
        raise g.InvalidStateError(f"p-quadrature covariance not PSD (eigenvalue {w.min():.3g})")
    # eigen-factor tolerates the singular blocks of ideal pure probes
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    chunks = []
    children = np.random.SeedSequence(seed).spawn(lanes)
    for size, child in zip(_lane_sizes(K, lanes), children):
        z = np.random.default_rng(child).standard_normal((size, mean.size))
        chunks.append(mean + z @ factor.T)
    phi = np.zeros(mean.size) if phi_true is None else np.asarray(phi_true, dtype=float)
    return ShotRecord(samples=np.concatenate(chunks), phi_true=phi, seed=int(seed))


def empirical_sensitivity(
    params: SchemeParams,
    phi0: float = 0.0,
    d_phi: float | None = None,
    K: int = 100_000,
    seed: int = 0,
    channel: int | None = None,
    lanes: int = 1,
) -> SensitivityReport:
    """Monte-Carlo sensitivity of the joint estimator (or of one ``channel``).

    The slope comes from a central difference of the sample means at
    ``phi0 +- d_phi`` (common shift of all node phases), the noise from the
    sample variance at ``phi0``; the three sample sets are independent.
    The standard error follows from the delta method.
    """
    if K < 2:
        raise ValueError("need K >= 2 for a sample variance")
    limit = small_angle_bound(params.r) / 10
    if d_phi is None:
        d_phi = limit
    elif not 0 < d_phi <= limit * (1 + 1e-12):
        raise ValueError(f"d_phi={d_phi:g} outside (0, {limit:g}] (small-angle bound / 10)")
    seeds = np.random.SeedSequence(seed).generate_state(3, dtype=np.uint64)

    def estimator(phi, s):
        phis = np.full(params.M, phi)
        rec = sample_homodyne(sense(params, phis), K, int(s), lanes=lanes, phi_true=phis)
        return rec.p_avg if channel is None else rec.samples[:, channel]

    lo, mid, hi = (estimator(phi0 + dp, s) for dp, s in zip((-d_phi, 0.0, d_phi), seeds))
    slope = (hi.mean() - lo.mean()) / (2 * d_phi)
    slope_var = (hi.var(ddof=1) + lo.var(ddof=1)) / K / (2 * d_phi) ** 2
    var = mid.var(ddof=1)
    if slope == 0:
        raise ZeroDivisionError("zero slope estimate")
    sigma = np.sqrt(var) / abs(slope)
    # Var(s)/s^2 ~ 1/(2(K-1)) for a normal sample; Var(slope)/slope^2 from the means
    rel_var = 1.0 / (2 * (K - 1)) + slope_var / slope**2
    unstable = bool(np.sqrt(slope_var) / abs(slope) > UNSTABLE_SLOPE_REL)
    return SensitivityReport(
        sigma=float(sigma),
        slope=float(slope),
        noise_var=float(var),
        N_coh=params.N_coh,
        N_sqz=params.N_sqz,
        sigma_err=float(sigma * np.sqrt(rel_var)),
        unstable=unstable,
    )


# -- spectra ----------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumTrace:
    freqs: np.ndarray
    psd: np.ndarray
    V_sn: float
    phi_avg_label: float
    n_averages: int
    seed: int | None = None

    def __post_init__(self):
        if self.freqs.shape != self.psd.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and psd must be 1-D arrays of equal length")
        if np.any(self.psd < 0):
            raise ValueError("psd must be non-negative")
        if np.any(np.diff(self.freqs) <= 0):
            raise ValueError("freqs must increase monotonically")


@dataclass(frozen=True)
class SpectrumModel:
    """Ground truth for synthetic spectra.

    ``tilt`` is the relative change of the noise floor per MHz away from the
    peak, mimicking a sloped detector response.
    """

    V_sn: float = 1.0
    theta1: float = 0.0
    theta2: float = 0.0
    peak_hz: float = 3e6
    bin_hz: float = 5e3
    half_span_bins: int = 100
    tilt: float = 0.0

    def amplitudes(self, params: SchemeParams) -> tuple[float, float, float]:
        return voltage_amplitudes(params, self.V_sn)

    def voltages(self, params: SchemeParams, phi_avg: float) -> tuple[float, float]:
        k, k_sq, k_asq = self.amplitudes(params)
        return (
            float(signal_voltage(phi_avg, k, self.theta1)),
            float(noise_voltage(phi_avg, k_sq, k_asq, self.theta2)),
        )

    def sigma_min(self, params: SchemeParams, ideal: bool = False) -> float:
        k, k_sq, k_asq = self.amplitudes(params)
        if ideal:
            return sigma_from_voltages(k, k_sq, k_asq)
        return sigma_from_voltages(k, k_sq, k_asq, self.theta1, self.theta2)

    def freqs(self) -> np.ndarray:
        n = self.half_span_bins
        return self.peak_hz + self.bin_hz * np.arange(-n, n + 1)


def synthesize_spectrum(
    params: SchemeParams,
    phi_avg: float,
    model: SpectrumModel = SpectrumModel(),
    n_averages: int = 2000,
    seed: int = 0,
) -> SpectrumTrace:
    """Sideband power spectrum around the modulation peak.

    Every bin carries the noise floor ``V_n^2``; only the peak bin also
    carries ``V_s^2``. Each bin is multiplied by ``1 + e/sqrt(n_averages)``
    with standard-normal ``e`` and clipped at zero.
    """
    if n_averages < 1:
        raise ValueError("n_averages must be at least 1")
    V_s, V_n = model.voltages(params, phi_avg)
    freqs = model.freqs()
    floor = V_n**2 * (1 + model.tilt * (freqs - model.peak_hz) / 1e6)
    clean = np.clip(floor, 0.0, None)
    clean[model.half_span_bins] += V_s**2
    rng = np.random.default_rng(seed)
    noisy = clean * (1 + rng.standard_normal(clean.size) / np.sqrt(n_averages))
    return SpectrumTrace(
        freqs=freqs,
        psd=np.clip(noisy, 0.0, None),
        V_sn=model.V_sn,
        phi_avg_label=float(phi_avg),
        n_averages=int(n_averages),
        seed=int(seed),
    )


@dataclass
class SpectrumSweep:
    traces: list = field(default_factory=list)
    truth: dict = field(default_factory=dict)


def synthesize_sweep(
    params: SchemeParams,
    phis,
    model: SpectrumModel = SpectrumModel(),
    n_averages: int = 2000,
    seed: int = 0,
) -> SpectrumSweep:
    """One spectrum per ``phi`` with independent seeds derived from ``seed``."""
    phis = np.asarray(phis, dtype=float)
    seeds = np.random.SeedSequence(seed).generate_state(phis.size, dtype=np.uint64)
    traces = [synthesize_spectrum(params, p, model, n_averages, int(s)) for p, s in zip(phis, seeds)]
    k, k_sq, k_asq = model.amplitudes(params)
    truth = {"k": k, "k_sq": k_sq, "k_asq": k_asq, "theta1": model.theta1,
             "theta2": model.theta2, "sigma_min": model.sigma_min(params),
             "sigma_ideal": model.sigma_min(params, ideal=True),
             "N_coh": params.N_coh, "N_sqz": params.N_sqz}
    return SpectrumSweep(traces=traces, truth=truth)
