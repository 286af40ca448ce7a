"""Data reduction: spectral peaks to voltages, voltages to sensitivity and photon numbers,
plus the wave-plate phase-control model and its calibration fit."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .montecarlo import SpectrumTrace
from .theory import noise_voltage, sigma_from_voltages


@dataclass(frozen=True)
class PeakDecomposition:
    V_s: float
    V_n: float
    baseline_fit: tuple[float, float]
    phi_avg: float
    V_s_err: float = 0.0
    V_n_err: float = 0.0
    below_baseline: bool = False

    def __post_init__(self):
        if not self.V_n > 0:
            raise ValueError("noise voltage must be positive")
        if self.V_s < 0:
            raise ValueError("signal voltage must be non-negative")


def _band_mask(freqs, band) -> np.ndarray:
    lo, hi = band
    return (freqs >= lo) & (freqs <= hi)


def default_fit_band(trace: SpectrumTrace, peak_hz: float, n_side: int = 40, gap: int = 2):
    """Symmetric baseline bands of ``n_side`` bins, ``gap`` bins clear of the peak."""
    if n_side < 10 or gap < 2:
        raise ValueError("fit band needs at least 10 bins per side and a gap of 2 bins")
    i = int(np.argmin(np.abs(trace.freqs - peak_hz)))
    f = trace.freqs
    lo_i, hi_i = i - gap - n_side, i + gap + n_side
    if lo_i < 0 or hi_i >= f.size:
        raise ValueError("trace too short for the requested fit band")
    return (f[lo_i], f[i - gap - 1]), (f[i + gap + 1], f[hi_i])


def extract_peak(trace: SpectrumTrace, peak_hz: float = 3e6, fit_band=None) -> PeakDecomposition:
    """Split the peak bin into signal and noise parts against a linear baseline.

    ``fit_band`` is a pair of ``(lo, hi)`` frequency intervals on either side
    of the peak; the default takes 40 bins per side with a 2-bin gap.
    """
    f, psd = trace.freqs, trace.psd
    i = int(np.argmin(np.abs(f - peak_hz)))
    if not (f[0] <= peak_hz <= f[-1]):
        raise ValueError(f"peak {peak_hz:g} Hz outside the trace")
    if fit_band is None:
        fit_band = default_fit_band(trace, peak_hz)
    left, right = (_band_mask(f, band) for band in fit_band)
    if not left.any() or not right.any():
        raise ValueError("fit band must contain bins on both sides of the peak")
    mask = left | right
    if mask[i]:
        raise ValueError("fit band must exclude the peak bin")
    x = (f[mask] - f[i]) / 1e6
    coef, cov = np.polyfit(x, psd[mask], 1, cov=True)
    slope, base = float(coef[0]), float(coef[1])
    base_var = float(cov[1, 1])
    # per-bin scatter is multiplicative, so scale the residual spread to the peak
    rel_scatter = np.std(psd[mask] / np.polyval(coef, x) - 1, ddof=2)
    peak = float(psd[i])
    if base <= 0:
        raise ValueError("baseline at the peak is not positive")
    excess = peak - base
    excess_err = float(np.hypot(rel_scatter * peak, np.sqrt(base_var)))
    # a peak below the baseline is reported through the flag with V_s = 0
    below = excess < 0
    V_s = float(np.sqrt(max(excess, 0.0)))
    V_n = float(np.sqrt(base))
    return PeakDecomposition(
        V_s=V_s,
        V_n=V_n,
        baseline_fit=(slope / 1e6, base),
        phi_avg=trace.phi_avg_label,
        # smooth bridge between d(V^2)/2V and sqrt(d(V^2)) as V_s -> 0
        V_s_err=float(excess_err / (2 * V_s + np.sqrt(excess_err))),
        V_n_err=float(np.sqrt(base_var) / (2 * V_n)),
        below_baseline=bool(below),
    )


# -- sensitivity fit --------------------------------------------------------


@dataclass(frozen=True)
class SensitivityFit:
    k: float
    theta1: float
    k_sq: float
    k_asq: float
    theta2: float
    sigma_min: float
    cov_signal: np.ndarray
    cov_noise: np.ndarray
    sigma_min_err: float = 0.0

    @property
    def errors(self) -> dict:
        e1 = np.sqrt(np.diag(self.cov_signal))
        e2 = np.sqrt(np.diag(self.cov_noise))
        return {"k": e1[0], "theta1": e1[1], "k_sq": e2[0], "k_asq": e2[1],
                "theta2": e2[2], "sigma_min": self.sigma_min_err}

    def as_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if not k.startswith("cov_")}
        out["errors"] = {k: float(v) for k, v in self.errors.items()}
        return out


def _as_points(points):
    rows = []
    for p in points:
        if isinstance(p, PeakDecomposition):
            rows.append((p.phi_avg, p.V_s, p.V_n, p.V_s_err, p.V_n_err))
        else:
            p = tuple(p)
            rows.append(p + (0.0,) * (5 - len(p)) if len(p) < 5 else p)
    arr = np.asarray(rows, dtype=float)
    phi, vs, vn, es, en = arr.T
    # unit weights when no uncertainties are supplied
    es = np.where(es > 0, es, 1.0) if np.any(es > 0) else np.ones_like(es)
    en = np.where(en > 0, en, 1.0) if np.any(en > 0) else np.ones_like(en)
    return phi, vs, vn, es, en


def _covariance(res) -> np.ndarray:
    J = res.jac
    dof = max(res.fun.size - J.shape[1], 1)
    chi2 = float(res.fun @ res.fun) / dof
    return np.linalg.pinv(J.T @ J) * max(chi2, 1e-300)


def fit_vs_vn(points, max_nfev: int = 2000) -> SensitivityFit:
    """Fit signal and noise voltages against the average phase.

    ``points`` holds :class:`PeakDecomposition` objects or tuples
    ``(phi, V_s, V_n[, V_s_err, V_n_err])`` with ``phi`` in radians. The signal
    model ``k sin(phi + theta1)`` is fitted on the ``phi >= 0`` branch; the
    noise model uses all points. Fit covariances are rescaled by the reduced
    chi-square, and the two fits are treated as independent when propagating
    into ``sigma_min``.
    """
    phi, vs, vn, es, en = _as_points(points)
    if phi.size < 4:
        raise ValueError("need at least 4 points")
    if np.ptp(phi) < 1e-6:
        raise ValueError("degenerate design: all phases equal")
    near_sq = np.abs(np.cos(phi)) > np.abs(np.sin(phi))
    if near_sq.all() or (~near_sq).all():
        raise ValueError("points must cover both the squeezing and anti-squeezing regions")

    branch = phi >= 0
    if branch.sum() < 2:
        raise ValueError("need at least two points with phi >= 0 for the signal fit")
    ps, ys, ws = phi[branch], vs[branch], es[branch]
    k0 = float(np.max(ys) / max(np.max(np.abs(np.sin(ps))), 1e-3))

    res_s = least_squares(
        lambda q: (q[0] * np.sin(ps + q[1]) - ys) / ws,
        x0=[k0, 0.0], max_nfev=max_nfev, x_scale=[max(k0, 1e-12), 0.1],
    )
    res_n = least_squares(
        lambda q: (noise_voltage(phi, q[0], q[1], q[2]) - vn) / en,
        x0=[float(vn.min()), float(vn.max()), 0.0],
        bounds=([0, 0, -np.pi / 4], [np.inf, np.inf, np.pi / 4]),
        max_nfev=max_nfev,
    )
    for res in (res_s, res_n):
        if not res.success:
            raise RuntimeError(f"fit did not converge: {res.message}")
    k, theta1 = res_s.x
    k_sq, k_asq, theta2 = res_n.x
    if k < 0:
        k, theta1 = -k, theta1 + np.pi
    cov_s, cov_n = _covariance(res_s), _covariance(res_n)
    if k_sq > k_asq:
        # same model with the roles swapped and the axis turned by 90 degrees
        k_sq, k_asq = k_asq, k_sq
        theta2 = theta2 - np.copysign(np.pi / 2, theta2) if theta2 else np.pi / 2
        cov_n = cov_n[np.ix_([1, 0, 2], [1, 0, 2])]

    def smin(q):
        return sigma_from_voltages(q[0], q[2], q[3], q[1], q[4])

    q0 = np.array([k, theta1, k_sq, k_asq, theta2])
    cov = np.zeros((5, 5))
    cov[:2, :2], cov[2:, 2:] = cov_s, cov_n
    grad = np.zeros(5)
    for j in range(5):
        h = 1e-6 * max(abs(q0[j]), 1e-3)
        e = np.zeros(5)
        e[j] = h
        grad[j] = (smin(q0 + e) - smin(q0 - e)) / (2 * h)
    return SensitivityFit(
        k=float(k), theta1=float(theta1), k_sq=float(k_sq), k_asq=float(k_asq),
        theta2=float(theta2), sigma_min=smin(q0), cov_signal=cov_s, cov_noise=cov_n,
        sigma_min_err=float(np.sqrt(grad @ cov @ grad)),
    )


@dataclass(frozen=True)
class PhotonCount:
    N_coh: float
    N_sqz: float
    N_coh_err: float = 0.0
    N_sqz_err: float = 0.0

    def __iter__(self):
        return iter((self.N_coh, self.N_sqz))


def count_photons(fit: SensitivityFit, V_sn: float, M: int, kind: str = "entangled",
                  n_sigma: float = 3.0) -> PhotonCount:
    """Photons per sample from the fitted voltage amplitudes.

    Squeezed photons follow from ``V_n(0)^2 + V_n(90 deg)^2 = k_sq^2 + k_asq^2``
    and coherent photons from the signal maximum ``k``. Entangled counts are
    divided by ``M``; separable ones refer to the measured channel.
    """
    if not V_sn > 0:
        raise ValueError("shot-noise voltage must be positive")
    scale = M if kind == "entangled" else 1
    e = fit.errors
    sqz_total = (fit.k_sq**2 + fit.k_asq**2) / V_sn**2 - 2
    sqz = sqz_total / 4 / scale
    sqz_err = np.hypot(2 * fit.k_sq * e["k_sq"], 2 * fit.k_asq * e["k_asq"]) / V_sn**2 / 4 / scale
    coh = fit.k**2 / (4 * V_sn**2) / scale
    coh_err = 2 * fit.k * e["k"] / (4 * V_sn**2) / scale
    if sqz < -max(n_sigma * sqz_err, 1e-9):
        raise ValueError(
            f"negative squeezed-photon estimate {sqz:.4g}; check the shot-noise voltage"
        )
    return PhotonCount(float(coh), float(max(sqz, 0.0)), float(coh_err), float(sqz_err))


# -- wave-plate phase control -----------------------------------------------


def jones_waveplate(retardance: float, theta: float) -> np.ndarray:
    """Jones matrix of a plate with fast axis at ``theta`` (rad) from p polarization."""
    c, s = np.cos(retardance / 2), np.sin(retardance / 2)
    return np.array(
        [[c + 1j * s * np.cos(2 * theta), 1j * s * np.sin(2 * theta)],
         [1j * s * np.sin(2 * theta), c - 1j * s * np.cos(2 * theta)]]
    )


@dataclass(frozen=True)
class WaveplateResult:
    J1: complex
    J2: complex
    I_HD: float
    fringe_amplitude: float
    fringe_offset: float
    phase_deg: float
    visibility: float


def _hd_signal(theta_v, phi_d, retardances, E_lo, E_sp) -> tuple[complex, complex, float]:
    half, quarter = retardances
    # phi_d is the LO phase lead over the probe: I_HD = 2 E_sp E_lo sin(4 theta_v - phi_d)
    j_in = np.array([E_lo, E_sp * np.exp(1j * phi_d)])
    J1, J2 = jones_waveplate(half, theta_v) @ jones_waveplate(quarter, np.pi / 4) @ j_in
    return complex(J1), complex(J2), float(abs(J1) ** 2 - abs(J2) ** 2)


def waveplate_phase(
    theta_v: float,
    phi_d: float,
    retardances: tuple[float, float] = (np.pi, np.pi / 2),
    E_lo: float = 1.0,
    E_sp: float = 1.0,
) -> WaveplateResult:
    """Homodyne difference signal behind a quarter-wave plate at 45 deg and a
    half-wave plate at ``theta_v``; angles in degrees, retardances in radians.

    The fringe over ``phi_d`` is written ``c0 - R sin(phi_j + phi_d')`` with
    ``phi_j`` the channel phase, so ideal plates give ``phi_j = phi_d - 4 theta_v``
    and ``I_HD = 2 E_sp E_lo sin(4 theta_v - phi_d)``. ``visibility`` is
    ``R / (2 E_sp E_lo)``.
    """
    tv = np.radians(theta_v)
    J1, J2, I = _hd_signal(tv, np.radians(phi_d), retardances, E_lo, E_sp)
    # fringe over the relative phase from three samples
    i0, i90, i180 = (_hd_signal(tv, x, retardances, E_lo, E_sp)[2] for x in (0, np.pi / 2, np.pi))
    c0 = 0.5 * (i0 + i180)
    b, c = 0.5 * (i0 - i180), i90 - c0
    # I(phi_d) = c0 + b cos(phi_d) + c sin(phi_d) = c0 - R sin(phi_d - psi)
    R = float(np.hypot(b, c))
    psi = np.arctan2(b, -c)
    return WaveplateResult(
        J1=J1, J2=J2, I_HD=I, fringe_amplitude=R, fringe_offset=float(c0),
        phase_deg=float(np.degrees(np.radians(phi_d) - psi)),
        visibility=R / (2 * E_lo * E_sp),
    )


@dataclass(frozen=True)
class FringeSample:
    """HD signal recorded while the relative phase is ramped by ``ramp_deg``."""

    theta_v: float
    ramp_deg: np.ndarray
    signal: np.ndarray


def fringe_phase(sample: FringeSample) -> tuple[float, float]:
    """Channel phase (deg) and amplitude from a linear sine fit ``c0 - R sin(phi + ramp)``."""
    ramp = np.radians(np.asarray(sample.ramp_deg, dtype=float))
    A = np.column_stack([np.ones_like(ramp), np.cos(ramp), np.sin(ramp)])
    (c0, b, c), *_ = np.linalg.lstsq(A, np.asarray(sample.signal, dtype=float), rcond=None)
    return float(np.degrees(np.arctan2(-b, -c))), float(np.hypot(b, c))


@dataclass
class CalibrationFit:
    k: np.ndarray
    b: np.ndarray
    k_err: np.ndarray
    b_err: np.ndarray
    residuals: list = field(default_factory=list)

    @property
    def max_residual_deg(self) -> float:
        return float(max(np.max(np.abs(r)) for r in self.residuals))

    def linear_within(self, tol_deg: float) -> bool:
        return self.max_residual_deg <= tol_deg

    def as_dict(self) -> dict:
        return {"k": self.k.tolist(), "b": self.b.tolist(), "k_err": self.k_err.tolist(),
                "b_err": self.b_err.tolist(), "max_residual_deg": self.max_residual_deg,
                "mean_abs_k": float(np.mean(np.abs(self.k)))}


def calibrate_channels(sweeps) -> CalibrationFit:
    """Fit ``phi_j = k_j theta_v + b_j`` for every channel.

    ``sweeps`` maps (or lists) channels to sequences of :class:`FringeSample`;
    fringe phases are unwrapped along ``theta_v`` before the linear fit.
    """
    items = list(sweeps.values()) if isinstance(sweeps, dict) else list(sweeps)
    ks, bs, kes, bes, resid = [], [], [], [], []
    for j, samples in enumerate(items):
        samples = sorted(samples, key=lambda s: s.theta_v)
        if len(samples) < 3:
            raise ValueError(f"channel {j}: need at least 3 sweep points")
        theta = np.array([s.theta_v for s in samples], dtype=float)
        if np.ptp(theta) == 0:
            raise ValueError(f"channel {j}: rank-deficient sweep (single plate angle)")
        phase = np.degrees(np.unwrap(np.radians([fringe_phase(s)[0] for s in samples])))
        if len(samples) > 3:
            coef, cov = np.polyfit(theta, phase, 1, cov=True)
        else:
            # too few points for a scaled covariance
            coef, cov = np.polyfit(theta, phase, 1), np.full((2, 2), np.nan)
        ks.append(coef[0])
        bs.append(coef[1])
        kes.append(np.sqrt(abs(cov[0, 0])))
        bes.append(np.sqrt(abs(cov[1, 1])))
        resid.append(phase - np.polyval(coef, theta))
    return CalibrationFit(np.array(ks), np.array(bs), np.array(kes), np.array(bes), resid)


def jones_sweep(theta_grid, phi_d: float, retardances=(np.pi, np.pi / 2), n_ramp: int = 36):
    """Noise-free fringes from the Jones model at each plate angle (degrees)."""
    ramp = np.linspace(0.0, 360.0, n_ramp, endpoint=False)
    out = []
    for tv in theta_grid:
        sig = [_hd_signal(np.radians(tv), np.radians(phi_d + r), retardances, 1.0, 1.0)[2] for r in ramp]
        out.append(FringeSample(float(tv), ramp, np.array(sig)))
    return out


def linear_law_sweep(k: float, b: float, theta_grid, n_ramp: int = 36, noise: float = 0.0,
                     amplitude: float = 2.0, n_repeats: int = 1, seed: int = 0):
    """Fringes whose phase follows ``k theta_v + b``.

    Each fringe is the mean of ``n_repeats`` records carrying additive
    Gaussian noise of standard deviation ``noise``.
    """
    rng = np.random.default_rng(seed)
    ramp = np.linspace(0.0, 360.0, n_ramp, endpoint=False)
    out = []
    for tv in theta_grid:
        phase = np.radians(k * tv + b + ramp)
        jitter = rng.standard_normal((n_repeats, ramp.size)).mean(axis=0)
        sig = -amplitude * np.sin(phase) + noise * jitter
        out.append(FringeSample(float(tv), ramp, sig))
    return out
