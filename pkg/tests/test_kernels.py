import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfopt.errors import ConvergenceError, DegenerateWeightsError, DomainError
from gfopt.kernels import (
    Family,
    KernelSpec,
    KernelState,
    concentration_point,
    grad_log_partition,
    inv_grad_log_partition,
    inverse_digamma,
    log_partition,
    moment_match_update,
    sample_from_uniforms,
    sufficient_statistic,
)
from gfopt.qmc import generate
from gfopt.smoothing import ParticleCloud

GAUSS1 = KernelSpec(Family.GAUSSIAN, 1)
GAMMA1 = KernelSpec(Family.GAMMA, 1)
EULER = 0.5772156649015329


def normal_cdf(x):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


class TestLogPartition:
    def test_gaussian_values(self):
        assert log_partition(KernelSpec("gaussian", 2), [0.0, 0.0]) == 0.0
        assert log_partition(GAUSS1, [3.0]) == 4.5

    def test_gamma_at_one(self):
        assert log_partition(GAMMA1, [1.0]) == 0.0

    def test_gamma_matches_mpmath(self):
        for t in (0.07, 0.5, 3.3, 41.0):
            assert log_partition(GAMMA1, [t]) == pytest.approx(float(mpmath.loggamma(t)), rel=1e-12)

    def test_gamma_domain(self):
        with pytest.raises(DomainError):
            log_partition(GAMMA1, [0.0])
        with pytest.raises(DomainError):
            grad_log_partition(GAMMA1, [-1.0])

    def test_shape_checked(self):
        with pytest.raises(DomainError):
            log_partition(GAUSS1, [1.0, 2.0])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0.05, 30.0), min_size=3, max_size=3),
           st.lists(st.floats(0.05, 30.0), min_size=3, max_size=3),
           st.floats(0.01, 0.99))
    def test_convexity(self, a, b, t):
        for fam in Family:
            spec = KernelSpec(fam, 3)
            a_, b_ = np.array(a), np.array(b)
            mid = log_partition(spec, t * a_ + (1 - t) * b_)
            chord = t * log_partition(spec, a_) + (1 - t) * log_partition(spec, b_)
            assert mid <= chord + 1e-12 * max(1.0, abs(chord))


class TestDigamma:
    def test_known_values(self):
        assert grad_log_partition(GAMMA1, [1.0])[0] == pytest.approx(-EULER, abs=1e-12)
        assert grad_log_partition(GAMMA1, [2.0])[0] == pytest.approx(1 - EULER, abs=1e-12)

    def test_gaussian_identity(self):
        np.testing.assert_array_equal(grad_log_partition(KernelSpec("gaussian", 2), [1.0, -2.0]), [1.0, -2.0])
        np.testing.assert_array_equal(inv_grad_log_partition(KernelSpec("gaussian", 2), [0.5, 0.5]), [0.5, 0.5])

    def test_inverse_known(self):
        assert inv_grad_log_partition(GAMMA1, [-0.5772156649])[0] == pytest.approx(1.0, abs=1e-9)
        assert inv_grad_log_partition(GAMMA1, [0.4227843351])[0] == pytest.approx(2.0, abs=1e-9)

    def test_inverse_against_mpmath(self):
        for mu in (-30.0, -5.0, -2.3, -2.2, -0.5, 0.0, 1.0, 4.0, 20.0):
            theta = inverse_digamma(mu)
            assert float(mpmath.digamma(theta)) == pytest.approx(mu, abs=1e-10 * max(1, abs(mu)))

    def test_psi_inverse_of_one(self):
        # root of psi(x) = 1, computed independently with mpmath
        ref = float(mpmath.findroot(lambda x: mpmath.digamma(x) - 1, 3.0))
        assert inverse_digamma(1.0) == pytest.approx(ref, abs=1e-10)
        assert ref == pytest.approx(3.2031714683769, abs=1e-10)

    def test_duality(self):
        rng = np.random.default_rng(11)
        theta = rng.uniform(0.05, 50.0, 1000)
        back = inverse_digamma(grad_log_partition(KernelSpec("gamma", 1000), theta))
        assert np.max(np.abs(back - theta)) <= 1e-8

    def test_non_finite_mean_rejected(self):
        with pytest.raises(ConvergenceError):
            inverse_digamma(np.nan)

    def test_scalar_in_scalar_out(self):
        assert np.ndim(inverse_digamma(0.3)) == 0


class TestSampling:
    def test_gaussian_median(self):
        assert sample_from_uniforms(GAUSS1, KernelState([0.0], 1.0), [[0.5]])[0, 0] == 0.0
        assert sample_from_uniforms(GAUSS1, KernelState([2.0], 4.0), [[0.5]])[0, 0] == 2.0

    def test_gaussian_inverse_cdf_against_erf(self):
        x = sample_from_uniforms(GAUSS1, KernelState([0.0], 1.0), [[0.8413447461]])[0, 0]
        assert x == pytest.approx(1.0, abs=1e-6)
        for u in (1e-10, 0.02, 0.3, 0.77, 1 - 1e-9):
            z = sample_from_uniforms(GAUSS1, KernelState([0.0], 1.0), [[u]])[0, 0]
            assert normal_cdf(z) == pytest.approx(u, rel=1e-7, abs=1e-14)

    @pytest.mark.parametrize("u", [0.0, 1.0])
    def test_boundary_uniforms_rejected(self, u):
        with pytest.raises(DomainError):
            sample_from_uniforms(GAUSS1, KernelState([0.0], 1.0), [[u]])

    def test_gaussian_moments(self):
        spec = KernelSpec("gaussian", 3)
        theta, gamma = np.array([1.0, -2.0, 0.5]), 0.3
        x = sample_from_uniforms(spec, KernelState(theta, gamma), generate("sobol", 2**14, 3, seed=4))
        assert np.max(np.abs(x.mean(axis=0) - theta)) <= 5e-3
        np.testing.assert_allclose(x.var(axis=0), gamma, rtol=0.05)

    @pytest.mark.parametrize("gamma", [1.0, 0.3, 0.05])
    def test_gamma_statistic_moments(self, gamma):
        theta = np.array([0.7, 4.0])
        spec = KernelSpec("gamma", 2)
        x = sample_from_uniforms(spec, KernelState(theta, gamma), generate("sobol", 2**14, 2, seed=1))
        t = sufficient_statistic(spec, x)
        np.testing.assert_allclose(t.mean(axis=0), grad_log_partition(spec, theta), atol=5e-3)
        trigamma = np.array([float(mpmath.psi(1, v)) for v in theta])
        np.testing.assert_allclose(t.var(axis=0), gamma * trigamma, rtol=0.05)

    def test_gamma_unit_dispersion_is_gamma_distribution(self):
        from scipy import stats

        x = sample_from_uniforms(GAMMA1, KernelState([2.5], 1.0), generate("sobol", 4096, 1, seed=2))[:, 0]
        assert stats.kstest(x, stats.gamma(2.5).cdf).statistic < 0.01

    def test_gamma_small_shape_stays_positive(self):
        x = sample_from_uniforms(GAMMA1, KernelState([0.05], 0.01), generate("sobol", 256, 1))
        assert np.all(x > 0) and np.all(np.isfinite(x))


class TestMomentMatch:
    @staticmethod
    def cloud(points, logw, state):
        return ParticleCloud(np.asarray(points, float).reshape(len(points), -1), np.asarray(logw, float), state)

    def test_equal_weights(self):
        s = KernelState([5.0], 1.0)
        assert moment_match_update(GAUSS1, s, self.cloud([0.0, 2.0], [0.0, 0.0], s))[0] == 1.0

    def test_single_survivor(self):
        s = KernelState([5.0], 1.0)
        assert moment_match_update(GAUSS1, s, self.cloud([0.0, 2.0], [0.0, -np.inf], s))[0] == 0.0

    def test_all_dead(self):
        s = KernelState([5.0], 1.0)
        with pytest.raises(DegenerateWeightsError):
            moment_match_update(GAUSS1, s, self.cloud([0.0, 2.0], [-np.inf, -np.inf], s))

    def test_gamma_solves_digamma(self):
        s = KernelState([1.0], 1.0)
        theta = moment_match_update(GAMMA1, s, self.cloud([1.0, math.e**2], [0.0, 0.0], s))[0]
        assert float(mpmath.digamma(theta)) == pytest.approx(1.0, abs=1e-10)

    def test_gaussian_is_weighted_mean(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(50, 2))
        lw = rng.normal(size=50) * 5
        s = KernelState([0.3, -0.2], 0.7)
        w = np.exp(lw - lw.max())
        expected = (w[:, None] * pts).sum(0) / w.sum()
        got = moment_match_update(KernelSpec("gaussian", 2), s, ParticleCloud(pts, lw, s))
        np.testing.assert_allclose(got, expected, atol=1e-14)

    def test_huge_logweights_do_not_overflow(self):
        s = KernelState([0.0], 1.0)
        got = moment_match_update(GAUSS1, s, self.cloud([0.0, 2.0], [1e5, 1e5], s))
        assert got[0] == 1.0


def test_concentration_point():
    np.testing.assert_array_equal(concentration_point(GAUSS1, [2.0]), [2.0])
    assert concentration_point(GAMMA1, [1.0])[0] == pytest.approx(math.exp(-EULER))


def test_state_validation():
    with pytest.raises(DomainError):
        KernelState([0.0], 0.0)
    with pytest.raises(DomainError):
        KernelState([0.0], 1.0, lam=-1.0)
    s = KernelState([1.0, 2.0], 0.5)
    assert s.dim == 2
    with pytest.raises(ValueError):
        s.theta[0] = 3.0
