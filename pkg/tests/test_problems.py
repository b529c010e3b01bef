import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from fredholm_gcv.discretization import KernelKind
from fredholm_gcv.errors import DomainError, QuadratureConvergenceError
from fredholm_gcv.problems import (NOISE_ALGORITHM, MixtureSpec, SampledData, add_noise,
                                   forward_transform, levy_pair, levy_transform, log_s_grid,
                                   mixture_density, transform_function)

THREE_PEAKS = MixtureSpec.from_lists([1, 2, 6], [0.1, 1, 10], [10, 13, 15])
OVERLAP = MixtureSpec.from_lists([2, 15, 50], [0.1, 0.4, 1.5], [3, 3, 3])


def lognormal_laplace_mp(s, theta, S):
    """E[exp(-s t)] for log t ~ N(log theta, 1/S), by mpmath quadrature in z."""
    s, theta, S = mpmath.mpf(s), mpmath.mpf(theta), mpmath.mpf(S)
    sd = 1 / mpmath.sqrt(S)
    dens = lambda z: mpmath.exp(-z * z / 2) / mpmath.sqrt(2 * mpmath.pi)
    return mpmath.quad(lambda z: dens(z) * mpmath.exp(-s * theta * mpmath.exp(sd * z)),
                       [-12, -3, 0, 3, 12])


class TestMixture:
    def test_value_at_theta(self):
        spec = MixtureSpec([(2.5, 3.0, 10.0)])
        assert mixture_density(spec, 3.0) == pytest.approx(2.5 * math.sqrt(10 / (2 * math.pi)) / 3)

    def test_unit_mass(self):
        spec = MixtureSpec([(1.0, 1.0, 10.0)])
        mass, _ = quad(lambda u: math.exp(u) * spec(math.exp(u)), -20, 20,
                       epsabs=1e-13, epsrel=1e-13)
        assert mass == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("theta,S", [(1.0, 10.0), (0.3, 2.0), (20.0, 50.0)])
    def test_mode(self, theta, S):
        spec = MixtureSpec([(1.0, theta, S)])
        mode = theta * math.exp(-1.0 / S)
        t = mode * np.exp(np.linspace(-0.01, 0.01, 2001))
        assert t[np.argmax(spec(t))] == pytest.approx(mode, rel=2e-5)
        # d/dt log f = (-1 - S (log t - log theta)) / t vanishes at the mode
        assert -1 - S * (math.log(mode) - math.log(theta)) == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("t", [0.0, -1.0, np.nan])
    def test_rejects_nonpositive_t(self, t):
        with pytest.raises(DomainError):
            mixture_density(THREE_PEAKS, t)

    @pytest.mark.parametrize("comps", [(), [(1, 1)], [(0, 1, 1)], [(1, -1, 1)], [(1, 1, np.inf)]])
    def test_invalid_spec(self, comps):
        with pytest.raises(DomainError):
            MixtureSpec(comps)

    def test_from_lists_length_mismatch(self):
        with pytest.raises(DomainError):
            MixtureSpec.from_lists([1, 2], [1], [1, 2])

    def test_vectorized_sum(self):
        t = np.array([0.05, 0.5, 5.0])
        parts = sum(MixtureSpec([c])(t) * c[0] / c[0] for c in THREE_PEAKS.components)
        np.testing.assert_allclose(THREE_PEAKS(t), parts, rtol=1e-14)

    def test_total_mass(self):
        assert THREE_PEAKS.total_mass == 9.0


class TestForwardTransform:
    @pytest.mark.parametrize("kind", list(KernelKind))
    @pytest.mark.parametrize("spec", [THREE_PEAKS, OVERLAP])
    def test_total_mass_at_zero(self, kind, spec):
        g = forward_transform(spec, kind, [0.0])
        assert g[0] == pytest.approx(spec.total_mass, rel=1e-8)

    def test_against_independent_quadrature(self):
        s = [0.0, 0.03, 0.5, 2.0, 7.0]
        g = forward_transform(THREE_PEAKS, KernelKind.LAPLACE, s)
        ref = [sum(a * lognormal_laplace_mp(sj, th, S) for a, th, S in THREE_PEAKS.components)
               for sj in s]
        np.testing.assert_allclose(g, np.array(ref, dtype=float), rtol=1e-8)

    def test_nmr_against_scipy(self):
        s = np.array([0.05, 1.0, 20.0])
        g = forward_transform(OVERLAP, KernelKind.NMR, s)
        for sj, gj in zip(s, g):
            ref, _ = quad(lambda u: math.exp(-sj * math.exp(-u)) * math.exp(u) * OVERLAP(math.exp(u)),
                          -12, 8, epsabs=1e-13, epsrel=1e-12, limit=200)
            assert gj == pytest.approx(ref, rel=1e-8)

    def test_narrow_peak_tends_to_exponential(self):
        # log t has standard deviation 0.05, so the correction to a e^{-s} is
        # (s^2 - s) / 800 to second order: below 1e-2 for s <= 3
        spec = MixtureSpec([(2.0, 1.0, 400.0)])
        s = np.linspace(0, 3, 13)
        g = forward_transform(spec, KernelKind.LAPLACE, s)
        np.testing.assert_allclose(g, 2 * np.exp(-s), rtol=1e-2)
        s5 = forward_transform(spec, KernelKind.LAPLACE, [5.0])[0]
        assert s5 / (2 * math.exp(-5)) - 1 == pytest.approx((25 - 5) / 800, rel=0.1)

    def test_one_more_doubling_changes_little(self):
        f = THREE_PEAKS
        s = log_s_grid(16)
        lo, hi = f.support()
        g = transform_function(f, KernelKind.LAPLACE, s, lo, hi)
        tighter = transform_function(f, KernelKind.LAPLACE, s, lo, hi, rtol=1e-12)
        np.testing.assert_allclose(g, tighter, rtol=1e-8)

    def test_convergence_cap(self):
        with pytest.raises(QuadratureConvergenceError):
            transform_function(lambda t: np.sin(1e4 * t), KernelKind.LAPLACE, [1.0], 0.1, 100,
                               max_n=256)

    def test_support_covers_components(self):
        lo, hi = THREE_PEAKS.support()
        assert lo < 0.1 * math.exp(-8 / math.sqrt(15)) and hi > 10 * math.exp(8 / math.sqrt(15))


class TestLevyPair:
    def test_closed_form_values(self):
        f, g = levy_pair()
        assert g(2.0) == pytest.approx(0.36787944117144233, rel=1e-15)
        assert g(0.0) == 1.0
        assert f(0.05) < f(0.15)
        assert f(10.0) < f(1.0)

    def test_unit_mass(self):
        f, _ = levy_pair()
        mass, _ = quad(lambda u: math.exp(u) * f(math.exp(u)), -12, 40, epsabs=1e-13, limit=400)
        assert mass == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("s", [0.1, 1.0, 10.0])
    def test_oracle_matches_closed_form(self, s):
        _, g = levy_pair()
        assert levy_transform([s])[0] == pytest.approx(g(s), rel=1e-6)

    def test_oracle_across_range(self):
        _, g = levy_pair()
        s = log_s_grid(64)
        np.testing.assert_allclose(levy_transform(s), g(s), rtol=1e-6)

    def test_oracle_rejects_zero(self):
        with pytest.raises(DomainError):
            levy_transform([0.0])


class TestNoise:
    def test_vanishing(self):
        g = np.linspace(0, 1, 10)
        np.testing.assert_allclose(add_noise(g, 1e-30, 3), g, atol=1e-20, rtol=0)

    def test_deterministic(self):
        g = np.zeros(64)
        assert add_noise(g, 0.1, 7).tobytes() == add_noise(g, 0.1, 7).tobytes()
        assert not np.array_equal(add_noise(g, 0.1, 7), add_noise(g, 0.1, 8))

    def test_moments(self):
        z = add_noise(np.zeros(100_000), 1.0, 11)
        assert abs(z.mean()) < 1e-2
        assert abs(z.std() - 1) < 1e-2

    def test_counter_based_generator(self):
        z = add_noise(np.zeros(4), 1.0, 5)
        ref = np.random.Generator(np.random.Philox(5)).standard_normal(4)
        np.testing.assert_array_equal(z, ref)
        assert "philox" in NOISE_ALGORITHM

    def test_rejects_negative_sigma(self):
        with pytest.raises(DomainError):
            add_noise([1.0], -1.0, 0)


class TestSampledData:
    def test_valid(self):
        d = SampledData([0.0, 1.0, 2.0], [3, 2, 1], 0.1, seed=4)
        assert d.m == 3 and d.row_weights is None and d.seed == 4

    def test_vector_sigma_weights(self):
        d = SampledData([1.0, 2.0], [1, 1], [0.5, 0.25])
        np.testing.assert_array_equal(d.row_weights, [2, 4])

    @pytest.mark.parametrize("s,g,sigma", [([1, 1], [1, 2], None), ([2, 1], [1, 2], None),
                                           ([1, 2], [1], None), ([-1, 2], [1, 1], None),
                                           ([1, 2], [np.nan, 1], None), ([1, 2], [1, 1], [1.0]),
                                           ([1, 2], [1, 1], [0.0, 1.0]), ([1, 2], [1, 1], -1.0),
                                           ([], [], None)])
    def test_invalid(self, s, g, sigma):
        with pytest.raises(DomainError):
            SampledData(s, g, sigma)

    @given(st.floats(0.01, 100))
    def test_scaled(self, c):
        d = SampledData([1.0, 2.0], [1.0, -2.0], 0.1)
        np.testing.assert_allclose(d.scaled(c).g, [c, -2 * c])

    def test_log_s_grid(self):
        s = log_s_grid()
        assert s.size == 64 and s[0] == pytest.approx(1e-2) and s[-1] == pytest.approx(1e2)
        with pytest.raises(DomainError):
            log_s_grid(10, 1.0, 1.0)
