"""Probe states for the separable and entangled sensing networks.

The entangled probe is one displaced, phase-squeezed mode split evenly over
``M`` nodes by a beam-splitter network; the separable probe is ``M``
independent copies of a displaced squeezed state. Channel loss acts before
the phase samples, then each node applies its own phase shift.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import gaussian as g

SchemeKind = Literal["separable", "entangled"]
KINDS = ("separable", "entangled")


@dataclass(frozen=True)
class SchemeParams:
    """Independent variables of one sensing configuration.

    ``N`` is the mean photon number hitting each sample, ``mu`` the fraction
    of it coming from squeezing and ``eta`` the channel efficiency.
    """

    M: int
    N: float
    eta: float
    mu: float
    kind: SchemeKind = "entangled"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not self.N >= 0:
            raise ValueError(f"N must be non-negative, got {self.N}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def alpha(self) -> float:
        return derive_alpha_r(self)[0]

    @property
    def r(self) -> float:
        return derive_alpha_r(self)[1]

    @property
    def N_sqz(self) -> float:
        return self.mu * self.N

    @property
    def N_coh(self) -> float:
        return (1.0 - self.mu) * self.N

    @classmethod
    def from_photons(cls, M, N_coh, N_sqz, eta, kind="entangled") -> "SchemeParams":
        N = N_coh + N_sqz
        return cls(M=M, N=N, eta=eta, mu=N_sqz / N if N > 0 else 0.0, kind=kind)

    def with_(self, **changes) -> "SchemeParams":
        return SchemeParams(**{**self.as_dict(), **changes})

    def as_dict(self) -> dict:
        return {"M": self.M, "N": self.N, "eta": self.eta, "mu": self.mu, "kind": self.kind}


@dataclass(frozen=True)
class OpoParams:
    """Below-threshold OPO: cavity HWHM ``f_cav`` (Hz), pump and threshold (W)."""

    f_cav: float
    P: float
    P_th: float
    eta: float = 1.0

    def __post_init__(self):
        if self.f_cav <= 0:
            raise ValueError("cavity half-width must be positive")
        if self.P_th <= 0 or not 0 <= self.P < self.P_th:
            raise ValueError(f"pump power must satisfy 0 <= P < P_th, got P={self.P}")
        if not 0 <= self.eta <= 1:
            raise ValueError("efficiency must lie in [0, 1]")


def derive_alpha_r(params: SchemeParams) -> tuple[float, float]:
    """Displacement ``alpha`` and squeezing ``r`` of the source state(s).

    The photon budget at the sample is ``eta (alpha^2 + sinh^2 r)`` for a
    separable probe and ``eta (alpha^2 + sinh^2 r) / M`` for the entangled one.
    """
    scale = params.M if params.kind == "entangled" else 1
    total = scale * params.N / params.eta
    sinh2 = params.mu * total
    alpha2 = total - sinh2
    if alpha2 < -1e-12:
        raise ValueError(
            f"inconsistent photon budget: alpha^2 = {alpha2:.3g} < 0 "
            f"(mu={params.mu}, N={params.N}, eta={params.eta})"
        )
    return float(np.sqrt(max(alpha2, 0.0))), float(np.arcsinh(np.sqrt(sinh2)))


def bsn_unitary(M: int) -> np.ndarray:
    """Balanced ``M``-port splitter; column 0 feeds the resource mode.

    For ``M = 4`` this is the three-beam-splitter network of the experiment,
    ``b1 = (a1 - i a4 + sqrt2 i a2)/2`` and so on. Other sizes use the
    discrete Fourier transform, which also splits mode 0 evenly.
    """
    if M == 4:
        s = np.sqrt(2.0)
        return 0.5 * np.array(
            [
                [1, s * 1j, 0, -1j],
                [1, -s * 1j, 0, -1j],
                [1, 0, s * 1j, 1j],
                [1, 0, -s * 1j, 1j],
            ],
            dtype=complex,
        )
    k = np.arange(M)
    return np.exp(2j * np.pi * np.outer(k, k) / M) / np.sqrt(M)


def compensation_phases(U: np.ndarray) -> np.ndarray:
    """Per-output rotations that put every resource contribution on ``+x``."""
    return -np.angle(U[:, 0])


def build_probe_state(params: SchemeParams, vacuum_noise: float = 0.0) -> g.GaussianState:
    """Probe state of all ``M`` nodes before loss and phase samples.

    ``vacuum_noise`` adds that many thermal photons to each unused network
    input (entangled scheme only); it regularizes fidelity computations.
    """
    alpha, r = derive_alpha_r(params)
    source = g.squeeze_displace(alpha, r)
    M = params.M
    if params.kind == "separable":
        state = source
        for _ in range(M - 1):
            state = state.tensor(source)
        return state
    state = source
    for _ in range(M - 1):
        state = state.tensor(g.thermal(vacuum_noise))
    if M == 1:
        return state
    U = bsn_unitary(M)
    U = np.diag(np.exp(1j * compensation_phases(U))) @ U
    return g.apply_passive(state, U)


def sense(
    params: SchemeParams,
    phis: Sequence[float],
    loss_after_phase: bool = False,
    vacuum_noise: float = 0.0,
) -> g.GaussianState:
    """Probe after channel loss and the per-node phase shifts ``phis`` (rad)."""
    phis = np.asarray(phis, dtype=float)
    if phis.shape != (params.M,):
        raise ValueError(f"expected {params.M} phases, got {phis.size}")
    state = build_probe_state(params, vacuum_noise=vacuum_noise)
    if loss_after_phase:
        return g.apply_loss(g.phase_shifts(state, phis), params.eta)
    return g.phase_shifts(g.apply_loss(state, params.eta), phis)


def joint_quadrature_weights(M: int) -> np.ndarray:
    """Weights of ``P_avg = sum_j p_j / M`` on the full quadrature vector."""
    w = np.zeros(2 * M)
    w[1::2] = 1.0 / M
    return w


def opo_spectrum(params: OpoParams, f) -> tuple:
    """Squeezing and anti-squeezing spectra ``(S_minus, S_plus)`` in shot-noise units."""
    f = np.asarray(f, dtype=float)
    x = np.sqrt(params.P / params.P_th)
    lor = (f / params.f_cav) ** 2
    s_minus = 1.0 - 4 * params.eta * x / ((1 + x) ** 2 + lor)
    s_plus = 1.0 + 4 * params.eta * x / ((1 - x) ** 2 + lor)
    if s_minus.ndim == 0:
        return float(s_minus), float(s_plus)
    return s_minus, s_plus


def squeezing_from_spectrum(s_minus: float, s_plus: float) -> tuple[float, float]:
    """Invert ``v_sq = eta e^{-2r} + 1 - eta`` and ``v_asq = eta e^{2r} + 1 - eta``."""
    # product of (v_sq - 1 + eta)(v_asq - 1 + eta) = eta^2 gives a linear equation in eta
    a, b = s_minus - 1.0, s_plus - 1.0
    eta = -a * b / (a + b)
    r = 0.5 * np.log((b + eta) / eta)
    return float(eta), float(r)


# -- config files -----------------------------------------------------------

_FLOAT_KEYS = {"N", "eta", "mu"}


def parse_scheme_config(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    Recognised keys: ``scheme``, ``M``, ``N``, ``eta``, ``mu`` and ``phis``
    (comma separated, radians). Other keys are returned verbatim as strings.
    """
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "M":
            out[key] = int(value)
        elif key in _FLOAT_KEYS:
            out[key] = float(value)
        elif key == "phis":
            out[key] = [float(v) for v in value.replace(" ", "").split(",") if v]
        else:
            out[key] = value
    return out


def load_scheme(path) -> tuple[SchemeParams, np.ndarray | None]:
    cfg = parse_scheme_config(Path(path).read_text())
    try:
        params = SchemeParams(
            M=cfg["M"], N=cfg["N"], eta=cfg["eta"], mu=cfg.get("mu", 0.0),
            kind=cfg.get("scheme", "entangled"),
        )
    except KeyError as exc:
        raise ValueError(f"missing key {exc.args[0]!r} in {path}") from None
    phis = cfg.get("phis")
    return params, None if phis is None else np.asarray(phis)
