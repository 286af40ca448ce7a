import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvsense import gaussian as g

from conftest import random_symplectic


def pure_wavefunction(state, x):
    """Position wavefunction of a pure single-mode Gaussian (vacuum variance 1/2)."""
    (q, p), V = state.mean, state.cov
    a = 1 / (4 * V[0, 0]) - 1j * V[0, 1] / (2 * V[0, 0])
    psi = np.exp(-a * (x - q) ** 2 + 1j * p * x)
    return psi / np.sqrt(np.trapezoid(np.abs(psi) ** 2, x))


def rotated_squeezed(alpha, r, theta, shift=0.0):
    s = g.phase_shift(g.squeeze_displace(alpha, r), theta, 0)
    return g.GaussianState(s.mean + np.array([0.0, shift]), s.cov)


class TestConstruction:
    def test_vacuum(self):
        v = g.vacuum(3)
        assert v.n_modes == 3
        np.testing.assert_allclose(v.cov, 0.5 * np.eye(6))

    def test_rejects_unphysical(self):
        with pytest.raises(g.InvalidStateError, match="uncertainty"):
            g.GaussianState(np.zeros(2), 0.3 * np.eye(2))

    def test_unphysical_allowed_without_validation(self):
        s = g.GaussianState(np.zeros(2), 0.3 * np.eye(2), validate=False)
        assert s.cov[0, 0] == 0.3

    def test_rejects_asymmetric(self):
        with pytest.raises(g.InvalidStateError, match="symmetric"):
            g.GaussianState(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]))

    def test_rejects_bad_shapes(self):
        with pytest.raises(g.InvalidStateError):
            g.GaussianState(np.zeros(3), np.eye(3))
        with pytest.raises(g.InvalidStateError):
            g.GaussianState(np.zeros(3), np.eye(2))

    def test_arrays_are_read_only(self):
        v = g.vacuum(1)
        with pytest.raises(ValueError):
            v.cov[0, 0] = 2.0

    def test_mode_out_of_range(self):
        with pytest.raises(IndexError):
            g.phase_shift(g.vacuum(2), 0.1, 5)

    def test_reduced_and_tensor(self):
        a, b = g.squeeze_displace(1.0, 0.3), g.thermal(0.7)
        ab = a.tensor(b)
        assert ab.reduced([1]).allclose(b)
        assert ab.reduced([0]).allclose(a)

    def test_symplectic_op_rejects_non_symplectic(self):
        with pytest.raises(ValueError):
            g.SymplecticOp(np.diag([2.0, 1.0]))

    def test_squeezed_variances(self):
        s = g.squeeze_displace(2.0, 0.5)
        np.testing.assert_allclose(np.diag(s.cov), [np.exp(1) / 2, np.exp(-1) / 2])
        assert s.mean[0] == pytest.approx(2 * np.sqrt(2))


class TestChannels:
    def test_loss_on_vacuum_is_identity(self):
        assert g.apply_loss(g.vacuum(2), 0.3).allclose(g.vacuum(2))

    def test_loss_scales_photons(self):
        s = g.squeeze_displace(1.5, 0.4)
        n = g.photon_number(s, 0)
        assert g.photon_number(g.apply_loss(s, 0.6), 0) == pytest.approx(0.6 * n)

    def test_loss_single_mode_keeps_others(self):
        s = g.squeeze_displace(1.0, 0.2).tensor(g.squeeze_displace(0.5, 0.1))
        out = g.apply_loss(s, 0.5, modes=[1])
        assert out.reduced([0]).allclose(s.reduced([0]))

    def test_loss_rejects_bad_eta(self):
        with pytest.raises(ValueError):
            g.apply_loss(g.vacuum(1), 1.5)

    def test_phase_shift_convention(self):
        s = g.phase_shift(g.squeeze_displace(1.0, 0.0), np.pi / 2, 0)
        np.testing.assert_allclose(s.mean, [0.0, np.sqrt(2)], atol=1e-12)

    def test_beamsplitter_convention(self):
        s = g.squeeze_displace(1.0, 0.0).tensor(g.vacuum(1))
        out = g.beamsplitter(s, 0, 1, 0.5)
        np.testing.assert_allclose(out.mean, [1.0, 0.0, -1.0, 0.0], atol=1e-12)

    def test_beamsplitter_same_mode(self):
        with pytest.raises(ValueError):
            g.beamsplitter(g.vacuum(2), 1, 1, 0.5)

    def test_passive_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            g.passive_symplectic(np.array([[1.0, 1.0], [0.0, 1.0]]))


class TestInvariants:
    @given(n_th=st.floats(0, 20))
    def test_thermal_symplectic_eigenvalue(self, n_th):
        assert g.symplectic_eigenvalues(g.thermal(n_th).cov)[0] == pytest.approx(n_th + 0.5)

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
    def test_symplectic_form_and_spectrum_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        S = random_symplectic(rng, n)
        W = g.symplectic_form(n)
        np.testing.assert_allclose(S @ W @ S.T, W, atol=1e-9)
        base = g.thermal(rng.uniform(0, 2))
        for _ in range(n - 1):
            base = base.tensor(g.thermal(rng.uniform(0, 2)))
        out = g.SymplecticOp(S)(base)
        np.testing.assert_allclose(
            g.symplectic_eigenvalues(out.cov), g.symplectic_eigenvalues(base.cov), rtol=1e-8
        )
        # uncertainty relation: V + i W / 2 >= 0
        assert np.linalg.eigvalsh(out.cov + 0.5j * W).min() > -1e-9

    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
    def test_passive_optics_conserve_photons(self, seed, n):
        rng = np.random.default_rng(seed)
        state = g.squeeze_displace(rng.uniform(0, 2), rng.uniform(0, 1))
        for _ in range(n - 1):
            state = state.tensor(g.squeeze_displace(rng.uniform(0, 2), rng.uniform(0, 1)))
        z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        U, _ = np.linalg.qr(z)
        out = g.apply_passive(state, U)
        assert g.total_photon_number(out) == pytest.approx(g.total_photon_number(state), rel=1e-10)

    def test_purity(self):
        assert g.purity(g.squeeze_displace(1.0, 0.7)) == pytest.approx(1.0)
        assert g.purity(g.thermal(1.0)) == pytest.approx(1 / 3)

    def test_tmsv_log_negativity(self):
        r = 0.6
        s = g.squeeze_displace(0, r).tensor(g.phase_shift(g.squeeze_displace(0, r), np.pi / 2, 0))
        tmsv = g.beamsplitter(s, 0, 1, 0.5)
        # two-mode squeezed vacuum: E_N = 2 r / ln 2
        assert g.logarithmic_negativity(tmsv, [0]) == pytest.approx(2 * r / np.log(2))
        assert g.logarithmic_negativity(tmsv, [0], base=np.e) == pytest.approx(2 * r)

    def test_product_state_not_entangled(self):
        s = g.squeeze_displace(1, 0.5).tensor(g.thermal(0.2))
        assert g.logarithmic_negativity(s, [1]) == 0.0

    def test_log_negativity_bad_partition(self):
        with pytest.raises(ValueError):
            g.logarithmic_negativity(g.vacuum(2), [0, 1])

    def test_snu_round_trip(self):
        s = g.squeeze_displace(0.8, 0.3)
        back = g.from_shot_noise_units(g.shot_noise_units(s), np.sqrt(2) * s.mean)
        assert back.allclose(s)

    def test_quadrature_blocks(self):
        s = g.from_quadrature_blocks(np.eye(2) * 0.8, np.eye(2) * 1.5)
        np.testing.assert_allclose(np.diag(s.cov), [0.4, 0.75, 0.4, 0.75])


class TestFidelity:
    @pytest.mark.parametrize("precision", [None, 30])
    @given(
        a1=st.floats(-1.5, 1.5), r1=st.floats(0, 0.8), t1=st.floats(0, np.pi),
        a2=st.floats(-1.5, 1.5), r2=st.floats(0, 0.8), t2=st.floats(0, np.pi),
        shift=st.floats(-1, 1),
    )
    def test_pure_states_match_wavefunction_overlap(self, precision, a1, r1, t1, a2, r2, t2, shift):
        s1 = rotated_squeezed(a1, r1, t1)
        s2 = rotated_squeezed(a2, r2, t2, shift)
        x = np.linspace(-14, 14, 8001)
        overlap = abs(np.trapezoid(np.conj(pure_wavefunction(s1, x)) * pure_wavefunction(s2, x), x))
        assert g.fidelity(s1, s2, precision=precision) == pytest.approx(overlap, abs=2e-6)

    def test_identical_states(self):
        s = g.apply_loss(g.squeeze_displace(1.0, 0.4), 0.7)
        assert g.fidelity(s, s) == pytest.approx(1.0, abs=1e-10)
        assert g.fidelity(s, s, precision=30) == pytest.approx(1.0, abs=1e-12)

    def test_thermal_states(self):
        # root fidelity of thermal states: 1 / (sqrt((n1+1)(n2+1)) - sqrt(n1 n2))
        n1, n2 = 0.4, 1.3
        want = 1 / (np.sqrt((n1 + 1) * (n2 + 1)) - np.sqrt(n1 * n2))
        assert g.fidelity(g.thermal(n1), g.thermal(n2)) == pytest.approx(want, rel=1e-9)
        assert g.fidelity(g.thermal(n1), g.thermal(n2), precision=30) == pytest.approx(want, rel=1e-12)

    def test_mode_mismatch(self):
        with pytest.raises(ValueError):
            g.fidelity(g.vacuum(1), g.vacuum(2))
