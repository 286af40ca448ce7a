"""Phase-space representation of multimode Gaussian states.

Quadratures are interleaved, ``(x1, p1, x2, p2, ...)``, with ``[x, p] = i``
so the vacuum has variance 1/2 in each quadrature. Shot-noise units (vacuum
variance 1) appear only at I/O boundaries, see :func:`shot_noise_units`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

SYMMETRY_TOL = 1e-10
PHYSICAL_TOL = 1e-9
PAIRING_TOL = 1e-9


class InvalidStateError(ValueError):
    """Raised when a covariance matrix is not a valid Gaussian covariance."""


def symplectic_form(n: int) -> np.ndarray:
    """Standard symplectic form for ``n`` modes in interleaved ordering."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and covariance matrix of an ``n``-mode Gaussian state.

    Set ``validate=False`` to hold measured matrices that violate the
    uncertainty relation by a small amount (rounded experimental data).
    """

    mean: np.ndarray
    cov: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise InvalidStateError(f"covariance must be 2n x 2n, got {cov.shape}")
        if mean.shape != (cov.shape[0],):
            raise InvalidStateError(
                f"mean has shape {mean.shape}, expected ({cov.shape[0]},)"
            )
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise InvalidStateError("non-finite entries in state")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise InvalidStateError("covariance matrix is not symmetric")
        cov = 0.5 * (cov + cov.T)
        if self.validate:
            nu = symplectic_eigenvalues(cov)
            if nu[0] < 0.5 - PHYSICAL_TOL:
                raise InvalidStateError(
                    f"uncertainty relation violated: smallest symplectic "
                    f"eigenvalue {nu[0]:.6g} < 1/2"
                )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    def quadrature_indices(self, modes: Iterable[int]) -> np.ndarray:
        idx = []
        for m in modes:
            self._check_mode(m)
            idx.extend((2 * m, 2 * m + 1))
        return np.array(idx, dtype=int)

    def _check_mode(self, mode: int) -> None:
        if not 0 <= int(mode) < self.n_modes:
            raise IndexError(f"mode {mode} out of range for {self.n_modes} modes")

    def reduced(self, modes: Sequence[int]) -> "GaussianState":
        """Marginal state on ``modes`` (in the given order)."""
        idx = self.quadrature_indices(modes)
        return GaussianState(
            self.mean[idx], self.cov[np.ix_(idx, idx)], validate=self.validate
        )

    def tensor(self, other: "GaussianState") -> "GaussianState":
        cov = scipy.linalg.block_diag(self.cov, other.cov)
        mean = np.concatenate([self.mean, other.mean])
        return GaussianState(mean, cov, validate=self.validate and other.validate)

    def allclose(self, other: "GaussianState", atol: float = 1e-10) -> bool:
        return (
            self.cov.shape == other.cov.shape
            and np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class SymplecticOp:
    """Affine symplectic map ``mean -> S mean + d``, ``cov -> S cov S^T``."""

    matrix: np.ndarray
    displacement: np.ndarray | None = None

    def __post_init__(self):
        S = np.array(self.matrix, dtype=float)
        n2 = S.shape[0]
        if S.shape != (n2, n2) or n2 % 2:
            raise ValueError(f"symplectic matrix must be 2n x 2n, got {S.shape}")
        W = symplectic_form(n2 // 2)
        if np.max(np.abs(S @ W @ S.T - W)) > 1e-10:
            raise ValueError("matrix does not preserve the symplectic form")
        d = np.zeros(n2) if self.displacement is None else np.array(
            self.displacement, dtype=float
        )
        object.__setattr__(self, "matrix", S)
        object.__setattr__(self, "displacement", d)

    def __call__(self, state: GaussianState) -> GaussianState:
        S = self.matrix
        if S.shape[0] != state.cov.shape[0]:
            raise ValueError("operator and state sizes differ")
        return GaussianState(
            S @ state.mean + self.displacement,
            S @ state.cov @ S.T,
            validate=state.validate,
        )


def embed(local: np.ndarray, modes: Sequence[int], n_modes: int) -> np.ndarray:
    """Embed a ``2k x 2k`` matrix acting on ``modes`` into ``n_modes``."""
    full = np.eye(2 * n_modes)
    idx = []
    for m in modes:
        idx.extend((2 * m, 2 * m + 1))
    full[np.ix_(idx, idx)] = local
    return full


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    """Real symplectic matrix of the passive map ``b = U a``."""
    U = np.asarray(U, dtype=complex)
    k = U.shape[0]
    if U.shape != (k, k) or not np.allclose(U @ U.conj().T, np.eye(k), atol=1e-12):
        raise ValueError("passive map must be a unitary matrix")
    S = np.zeros((2 * k, 2 * k))
    S[0::2, 0::2] = U.real
    S[0::2, 1::2] = -U.imag
    S[1::2, 0::2] = U.imag
    S[1::2, 1::2] = U.real
    return S


# -- states -----------------------------------------------------------------


def vacuum(n: int) -> GaussianState:
    if n < 1:
        raise ValueError("number of modes must be at least 1")
    return GaussianState(np.zeros(2 * n), 0.5 * np.eye(2 * n))


def thermal(n_th: float) -> GaussianState:
    """Single-mode thermal state with mean photon number ``n_th``."""
    if n_th < 0:
        raise ValueError("thermal photon number must be non-negative")
    return GaussianState(np.zeros(2), (n_th + 0.5) * np.eye(2))


def squeeze_displace(alpha: float, r: float) -> GaussianState:
    """``D(alpha) S(r)|0>`` with real ``alpha``; ``r > 0`` squeezes ``p``."""
    mean = np.array([np.sqrt(2.0) * alpha, 0.0])
    cov = np.diag([np.exp(2 * r) / 2, np.exp(-2 * r) / 2])
    return GaussianState(mean, cov)


# -- channels and gates -----------------------------------------------------


def _mode_list(state: GaussianState, modes) -> list[int]:
    if modes is None:
        return list(range(state.n_modes))
    if np.isscalar(modes):
        modes = [modes]
    out = [int(m) for m in modes]
    for m in out:
        state._check_mode(m)
    return out


def apply_loss(state: GaussianState, eta: float, modes=None) -> GaussianState:
    """Pure-loss channel of transmission ``eta`` on ``modes`` (default all)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    modes = _mode_list(state, modes)
    scale = np.ones(2 * state.n_modes)
    noise = np.zeros(2 * state.n_modes)
    for m in modes:
        scale[2 * m : 2 * m + 2] = np.sqrt(eta)
        noise[2 * m : 2 * m + 2] = (1.0 - eta) / 2
    cov = state.cov * np.outer(scale, scale) + np.diag(noise)
    return GaussianState(scale * state.mean, cov, validate=state.validate)


def add_thermal_noise(state: GaussianState, n_th: float, modes=None) -> GaussianState:
    """Additive classical noise of ``n_th`` photons per selected mode."""
    modes = _mode_list(state, modes)
    noise = np.zeros(2 * state.n_modes)
    for m in modes:
        noise[2 * m : 2 * m + 2] = n_th
    return GaussianState(state.mean, state.cov + np.diag(noise), validate=state.validate)


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def phase_shift(state: GaussianState, phi: float, mode: int) -> GaussianState:
    """Rotate mode ``mode`` by ``phi``: ``x -> x cos - p sin``, ``p -> x sin + p cos``."""
    state._check_mode(mode)
    S = embed(rotation_matrix(phi), [mode], state.n_modes)
    return GaussianState(S @ state.mean, S @ state.cov @ S.T, validate=state.validate)


def phase_shifts(state: GaussianState, phis: Sequence[float]) -> GaussianState:
    """Apply one phase shift per mode."""
    phis = np.asarray(phis, dtype=float)
    if phis.shape != (state.n_modes,):
        raise ValueError(f"expected {state.n_modes} phases, got {phis.shape}")
    S = scipy.linalg.block_diag(*[rotation_matrix(p) for p in phis])
    return GaussianState(S @ state.mean, S @ state.cov @ S.T, validate=state.validate)


def beamsplitter_unitary(transmittance: float, phase: float = 0.0) -> np.ndarray:
    t = np.sqrt(transmittance)
    r = np.sqrt(1.0 - transmittance)
    return np.array(
        [[t, np.exp(1j * phase) * r], [-np.exp(-1j * phase) * r, t]], dtype=complex
    )


def beamsplitter(
    state: GaussianState, i: int, j: int, transmittance: float, phase: float = 0.0
) -> GaussianState:
    """Two-mode beam splitter.

    ``b_i = sqrt(T) a_i + e^{i phase} sqrt(1-T) a_j`` and
    ``b_j = -e^{-i phase} sqrt(1-T) a_i + sqrt(T) a_j``.
    """
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    state._check_mode(i)
    state._check_mode(j)
    return apply_passive(state, beamsplitter_unitary(transmittance, phase), [i, j])


def apply_passive(state: GaussianState, U: np.ndarray, modes=None) -> GaussianState:
    """Apply the linear-optical network ``b = U a`` to ``modes``."""
    modes = _mode_list(state, modes)
    if len(set(modes)) != len(modes):
        raise ValueError("repeated mode index")
    S = embed(passive_symplectic(U), modes, state.n_modes)
    return GaussianState(S @ state.mean, S @ state.cov @ S.T, validate=state.validate)


# -- invariants -------------------------------------------------------------


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of ``cov``, ascending, one value per mode."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise ValueError(f"covariance must be 2n x 2n, got {cov.shape}")
    if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
        raise ValueError("covariance matrix is not symmetric")
    n = cov.shape[0] // 2
    ev = np.sort(np.abs(np.linalg.eigvals(symplectic_form(n) @ cov)))
    # eigenvalues come in +/- i nu pairs
    pairs = ev.reshape(n, 2)
    spread = np.abs(pairs[:, 0] - pairs[:, 1])
    if np.any(spread > PAIRING_TOL * max(1.0, float(ev[-1]))):
        raise ValueError("symplectic eigenvalues failed to pair up")
    return pairs.mean(axis=1)


def partial_transpose(cov: np.ndarray, modes: Iterable[int]) -> np.ndarray:
    """Flip the sign of ``p`` for every mode in ``modes``."""
    cov = np.asarray(cov, dtype=float)
    T = np.ones(cov.shape[0])
    for m in modes:
        T[2 * m + 1] = -1.0
    return cov * np.outer(T, T)


def logarithmic_negativity(
    state: GaussianState, partition: Iterable[int], base: float = 2.0
) -> float:
    """Logarithmic negativity across the cut ``partition | rest``.

    Sums ``-log(2 nu)`` over the partially transposed symplectic eigenvalues
    below 1/2 (i.e. below 1 in shot-noise units).
    """
    part = sorted({int(m) for m in partition})
    n = state.n_modes
    if not part or len(part) >= n:
        raise ValueError("partition must be a non-empty proper subset of the modes")
    for m in part:
        state._check_mode(m)
    nu = symplectic_eigenvalues(partial_transpose(state.cov, part))
    small = 2.0 * nu[2.0 * nu < 1.0]
    return float(-np.sum(np.log(small)) / np.log(base))


def photon_number(state: GaussianState, mode: int) -> float:
    state._check_mode(mode)
    i = 2 * mode
    var = state.cov[i, i] + state.cov[i + 1, i + 1]
    mean2 = state.mean[i] ** 2 + state.mean[i + 1] ** 2
    return float(max(0.0, (var - 1.0) / 2 + mean2 / 2))


def total_photon_number(state: GaussianState) -> float:
    return sum(photon_number(state, m) for m in range(state.n_modes))


def purity(state: GaussianState) -> float:
    return float(1.0 / np.sqrt(np.linalg.det(2.0 * state.cov)))


# -- units ------------------------------------------------------------------


def shot_noise_units(state: GaussianState) -> np.ndarray:
    """Covariance matrix rescaled so the vacuum is the identity."""
    return 2.0 * state.cov


def from_shot_noise_units(cov_snu, mean_snu=None, validate: bool = True) -> GaussianState:
    """Inverse of :func:`shot_noise_units`; means scale by ``1/sqrt(2)``."""
    cov = np.asarray(cov_snu, dtype=float) / 2.0
    mean = (
        np.zeros(cov.shape[0])
        if mean_snu is None
        else np.asarray(mean_snu, dtype=float) / np.sqrt(2.0)
    )
    return GaussianState(mean, cov, validate=validate)


def from_quadrature_blocks(mx, mp, validate: bool = False) -> GaussianState:
    """Assemble a state from separate x-x and p-p covariance blocks.

    Cross x-p covariances are taken to be zero. The blocks are in shot-noise
    units, as reported by a homodyne covariance reconstruction.
    """
    mx = np.asarray(mx, dtype=float)
    mp = np.asarray(mp, dtype=float)
    if mx.shape != mp.shape or mx.shape[0] != mx.shape[1]:
        raise ValueError("x and p blocks must be square and of equal size")
    n = mx.shape[0]
    cov = np.zeros((2 * n, 2 * n))
    cov[0::2, 0::2] = mx
    cov[1::2, 1::2] = mp
    return from_shot_noise_units(cov, validate=validate)


# -- fidelity ---------------------------------------------------------------


def fidelity(a: GaussianState, b: GaussianState, precision: int | None = None) -> float:
    """Root Uhlmann fidelity ``Tr sqrt(sqrt(a) b sqrt(a))`` of two Gaussian states.

    Closed form of Banchi, Braunstein & Pirandola (PRL 115, 260501). The
    matrix square root is ill-conditioned when both states are nearly pure;
    pass ``precision`` (decimal digits) to evaluate it with mpmath instead of
    double precision.
    """
    if a.cov.shape != b.cov.shape:
        raise ValueError("states have different numbers of modes")
    if precision is not None:
        return _fidelity_mp(a, b, precision)
    n = a.n_modes
    W = symplectic_form(n)
    V1, V2 = a.cov, b.cov
    S = V1 + V2
    S_inv = np.linalg.inv(S)
    v_aux = W.T @ S_inv @ (W / 4 + V2 @ W @ V1)
    # det(sqrt(I + A^-2/4) + I) as a product over the spectrum of A = v_aux W;
    # the matrix form hits sqrtm(0) for identical pure states
    lams = np.linalg.eigvals(v_aux @ W).astype(complex)
    if np.any(lams == 0):
        raise ArithmeticError("singular auxiliary matrix")
    factor = np.prod(1 + np.sqrt(1 + 1 / (4 * lams**2)))
    f_tot = (2 ** (2 * n) * factor * np.linalg.det(v_aux)).real
    det_s = np.linalg.det(S)
    f0 = (f_tot / det_s) ** 0.25
    d = b.mean - a.mean
    return float(np.real(f0) * np.exp(-0.25 * d @ S_inv @ d))


def _fidelity_mp(a: GaussianState, b: GaussianState, precision: int) -> float:
    import mpmath

    with mpmath.workdps(precision):
        n = a.n_modes
        W = mpmath.matrix(symplectic_form(n).tolist())
        V1 = mpmath.matrix(a.cov.tolist())
        V2 = mpmath.matrix(b.cov.tolist())
        S = V1 + V2
        S_inv = S**-1
        v_aux = W.T * S_inv * (W / 4 + V2 * W * V1)
        # det(sqrt(I + A^-2/4) + I) from the spectrum of A = v_aux W; mpmath's
        # iterative sqrtm stalls when both states are close to pure
        try:
            lams = mpmath.eig(v_aux * W, left=False, right=False)
        except RuntimeError as exc:
            raise ArithmeticError(f"eigenvalue iteration failed: {exc}") from None
        if any(lam == 0 for lam in lams):
            raise ArithmeticError("singular auxiliary matrix")
        factor = mpmath.mpf(1)
        for lam in lams:
            factor *= 1 + mpmath.sqrt(1 + 1 / (4 * lam**2))
        f_tot = mpmath.re(2 ** (2 * n) * factor * mpmath.det(v_aux))
        det_s = mpmath.det(S)
        if f_tot <= 0 or det_s <= 0:
            raise ArithmeticError("fidelity evaluation produced a non-positive determinant")
        d = mpmath.matrix((b.mean - a.mean).tolist())
        expo = (d.T * S_inv * d)[0]
        return float((f_tot / det_s) ** mpmath.mpf("0.25") * mpmath.exp(-expo / 4))
