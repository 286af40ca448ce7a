import numpy as np
import pytest

from cvsense import gaussian as g
from cvsense import montecarlo as mc
from cvsense import theory as t
from cvsense.network import SchemeParams, joint_quadrature_weights, sense

HEADLINE = SchemeParams.from_photons(4, 2.18, 0.30, 0.735)


class TestSampling:
    def test_vacuum_variance(self):
        rec = mc.sample_homodyne(g.vacuum(2), 200_000, seed=1)
        np.testing.assert_allclose(rec.samples.var(axis=0), 0.5, rtol=0.01)
        np.testing.assert_allclose(rec.samples.mean(axis=0), 0.0, atol=0.01)

    def test_deterministic(self):
        s = sense(HEADLINE, np.zeros(4))
        a = mc.sample_homodyne(s, 1000, seed=7, lanes=3)
        b = mc.sample_homodyne(s, 1000, seed=7, lanes=3)
        np.testing.assert_array_equal(a.samples, b.samples)
        assert a.samples.shape == (1000, 4)

    def test_lanes_follow_spawned_children(self):
        rec = mc.sample_homodyne(g.vacuum(1), 5, seed=3, lanes=2)
        first = np.random.SeedSequence(3).spawn(2)[0]
        z = np.random.default_rng(first).standard_normal((3, 1))
        np.testing.assert_allclose(rec.samples[:3], z * np.sqrt(0.5))

    def test_joint_variance(self):
        state = sense(HEADLINE, np.zeros(4))
        w = joint_quadrature_weights(4)
        rec = mc.sample_homodyne(state, 400_000, seed=5)
        assert (rec.samples @ w[1::2]).var() == pytest.approx(w @ state.cov @ w, rel=0.01)

    def test_singular_pure_probe(self):
        # an ideal entangled probe has a rank-deficient p block
        p = HEADLINE.with_(eta=1.0)
        rec = mc.sample_homodyne(sense(p, np.zeros(4)), 10, seed=0)
        assert np.all(np.isfinite(rec.samples))

    @pytest.mark.parametrize("kwargs", [dict(K=0), dict(lanes=0)])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            mc.sample_homodyne(g.vacuum(1), **{**dict(K=10, seed=0), **kwargs})


class TestEmpirical:
    def test_headline(self):
        rep = mc.empirical_sensitivity(HEADLINE, K=200_000, seed=11)
        assert abs(rep.sigma - t.sigma_for(HEADLINE)) < 3 * rep.sigma_err
        assert not rep.unstable

    def test_separable(self):
        p = SchemeParams.from_photons(4, 2.32, 0.31, 0.735, kind="separable")
        rep = mc.empirical_sensitivity(p, K=200_000, seed=12)
        assert abs(rep.sigma - t.sigma_for(p)) < 3 * rep.sigma_err

    def test_single_channel(self):
        state = sense(HEADLINE, np.zeros(4))
        w = joint_quadrature_weights(4)
        ratio = np.sqrt(state.cov[1, 1] / (w @ state.cov @ w))
        rep = mc.empirical_sensitivity(HEADLINE, K=200_000, seed=13, channel=0)
        want = ratio * t.sigma_for(HEADLINE)
        assert abs(rep.sigma - want) < 3 * rep.sigma_err

    def test_same_seed_same_report(self):
        a = mc.empirical_sensitivity(HEADLINE, K=2000, seed=4)
        b = mc.empirical_sensitivity(HEADLINE, K=2000, seed=4)
        assert a == b

    def test_unstable_flag(self):
        rep = mc.empirical_sensitivity(HEADLINE, K=20, seed=0, d_phi=1e-4)
        assert rep.unstable

    def test_large_step_rejected(self):
        with pytest.raises(ValueError, match="small-angle"):
            mc.empirical_sensitivity(HEADLINE, K=100, d_phi=0.5)


class TestSpectra:
    def test_clean_peak(self):
        model = mc.SpectrumModel(V_sn=2.0)
        trace = mc.synthesize_spectrum(HEADLINE, 0.3, model, n_averages=10**12)
        V_s, V_n = model.voltages(HEADLINE, 0.3)
        assert trace.psd[model.half_span_bins] == pytest.approx(V_s**2 + V_n**2, rel=1e-5)
        assert trace.psd[0] == pytest.approx(V_n**2, rel=1e-5)

    def test_grid(self):
        model = mc.SpectrumModel(half_span_bins=10)
        f = model.freqs()
        assert f.size == 21 and f[10] == 3e6

    def test_seeded(self):
        a = mc.synthesize_sweep(HEADLINE, [0.0, 0.5], seed=9)
        b = mc.synthesize_sweep(HEADLINE, [0.0, 0.5], seed=9)
        np.testing.assert_array_equal(a.traces[1].psd, b.traces[1].psd)
        assert a.traces[0].seed != a.traces[1].seed

    def test_truth(self):
        model = mc.SpectrumModel(theta1=np.radians(3.4), theta2=np.radians(1.6))
        truth = mc.synthesize_sweep(HEADLINE, [0.0], model).truth
        assert truth["sigma_min"] > truth["sigma_ideal"]
        assert truth["sigma_ideal"] == pytest.approx(t.sigma_for(HEADLINE))

    def test_trace_validation(self):
        with pytest.raises(ValueError):
            mc.SpectrumTrace(np.array([1.0, 0.5]), np.array([1.0, 1.0]), 1.0, 0.0, 1)
        with pytest.raises(ValueError):
            mc.SpectrumTrace(np.array([1.0, 2.0]), np.array([1.0, -1.0]), 1.0, 0.0, 1)
        with pytest.raises(ValueError):
            mc.synthesize_spectrum(HEADLINE, 0.0, n_averages=0)


def test_standard_error_is_calibrated():
    rng = np.random.default_rng(99)
    z = []
    for i in range(120):
        p = SchemeParams(M=int(rng.integers(1, 6)), N=float(rng.uniform(0.5, 5)),
                         eta=float(rng.uniform(0.3, 1)), mu=float(rng.uniform(0.05, 0.5)),
                         kind="entangled" if i % 2 else "separable")
        rep = mc.empirical_sensitivity(p, K=5000, seed=i)
        z.append((rep.sigma - t.sigma_for(p)) / rep.sigma_err)
    z = np.array(z)
    assert abs(z.mean()) < 0.3
    assert 0.8 < z.std() < 1.2
