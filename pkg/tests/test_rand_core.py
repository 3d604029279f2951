"""Base sampler tests: determinism, exactness against analytic moments and
closed-form laws, and equivalence of the two CTS sampling routes."""

import numpy as np
import pytest
from scipy import stats
from scipy.special import erfc, gamma as gamma_fn

from _helpers import z_score
from tsousim import cts_ou
from tsousim.rand_core import (
    CtsParams,
    GammaLaw,
    RngStream,
    cts_tilting_acceptance,
    sample_cts,
    sample_gamma,
    sample_inverse_gaussian,
    sample_poisson,
    sample_stable_subordinator,
    uniform,
)

# Median of the positive stable law with Laplace transform exp(-u^0.9),
# frozen from two independent oracles that agree to 13 digits:
# mpmath.invertlaplace of exp(-s^0.9)/s (Talbot) and the angular-integral
# representation of the CDF, each solved for the 0.5 quantile.
STABLE_09_MEDIAN = 0.8867701677171331


class TestUniform:
    def test_range_contract(self):
        u = uniform(RngStream(1))
        assert 0.0 <= u < 1.0

    def test_determinism_same_address(self):
        a = uniform(RngStream(7, 3), size=5)
        b = uniform(RngStream(7, 3), size=5)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        assert not np.array_equal(
            uniform(RngStream(7, 0), size=8), uniform(RngStream(7, 1), size=8)
        )

    def test_distinct_streams_uncorrelated(self):
        # adjacent stream ids from one seed behave like independent streams
        n = 10**5
        base = uniform(RngStream(7, 0), size=n)
        for sid in (1, 2, 3):
            other = uniform(RngStream(7, sid), size=n)
            corr = np.corrcoef(base, other)[0, 1]
            assert abs(corr) < 4.0 / np.sqrt(n)

    def test_ks_against_uniform(self):
        n = 10**5
        u = uniform(RngStream(11, 0), size=n)
        d = stats.kstest(u, "uniform").statistic
        assert d < 1.36 / np.sqrt(n) * 1.5


class TestGamma:
    def test_exponential_special_case(self):
        beta = 1.4
        x = sample_gamma(GammaLaw(1.0, beta), RngStream(2, 1), size=10**6)
        assert abs(z_score(x, 1.0 / beta, 1)) < 4.0

    def test_boosted_shape_mean(self):
        x = sample_gamma(GammaLaw(0.5, 2.0), RngStream(2, 2), size=10**6)
        assert abs(z_score(x, 0.25, 1)) < 4.0

    def test_boosted_shape_variance(self):
        x = sample_gamma(GammaLaw(0.5, 2.0), RngStream(2, 3), size=10**6)
        assert abs(z_score(x, 0.125, 2)) < 4.0

    @pytest.mark.parametrize("shape,rate", [(0.0, 1.0), (1.0, -2.0), (-0.5, 1.0)])
    def test_parameter_domain(self, shape, rate):
        with pytest.raises(ValueError):
            GammaLaw(shape, rate)


class TestPoisson:
    def test_zero_mean(self):
        assert np.all(sample_poisson(0.0, RngStream(3, 1), size=100) == 0)

    def test_mean_matches_step_law_rate(self):
        # rate of the compound part of a CTS-OU step at the reference params
        proc = cts_ou.CtsOuProcess(CtsParams(0.5, 1.4, 0.8), 10.0)
        lam = cts_ou.step_law(proc, 30.0 / 365.0).lambda_a
        n = sample_poisson(lam, RngStream(3, 2), size=10**6)
        assert abs(z_score(n.astype(float), lam, 1)) < 4.0

    def test_variance_100(self):
        n = sample_poisson(100.0, RngStream(3, 3), size=10**6)
        assert abs(z_score(n.astype(float), 100.0, 2)) < 4.0

    def test_negative_mean_rejected(self):
        with pytest.raises(ValueError):
            sample_poisson(-1.0, RngStream(3, 4))


class TestStableSubordinator:
    def test_levy_half_closed_form_cdf(self):
        # alpha = 1/2 is the Levy(1/2) law with CDF erfc(1/(2 sqrt(x)))
        s = sample_stable_subordinator(0.5, RngStream(4, 1), size=10**5)
        p = stats.kstest(s, lambda x: erfc(1.0 / (2.0 * np.sqrt(x)))).pvalue
        assert p > 0.05

    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_laplace_transform_identity(self, alpha):
        s = sample_stable_subordinator(alpha, RngStream(4, 2), size=10**6)
        assert abs(z_score(np.exp(-s), np.exp(-1.0), 1)) < 4.0

    def test_median_alpha_09(self):
        s = sample_stable_subordinator(0.9, RngStream(4, 3), size=2 * 10**5)
        assert abs(np.median(s) / STABLE_09_MEDIAN - 1.0) < 0.02

    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
    def test_parameter_domain(self, alpha):
        with pytest.raises(ValueError):
            sample_stable_subordinator(alpha, RngStream(4, 4))


class TestCts:
    def test_alpha0_is_gamma(self):
        p = CtsParams(0.0, 1.4, 0.8)
        x = sample_cts(p, RngStream(5, 1), size=10**6)
        for k in (1, 2):
            truth = p.c * gamma_fn(float(k)) / p.beta**k
            assert abs(z_score(x, truth, k)) < 4.0

    def test_mean_alpha_half(self):
        p = CtsParams(0.5, 1.4, 0.8)
        truth = p.c * p.beta ** (p.alpha - 1.0) * gamma_fn(1.0 - p.alpha)
        assert truth == pytest.approx(1.1984, abs=2e-4)
        x = sample_cts(p, RngStream(5, 2), size=10**6)
        assert abs(z_score(x, truth, 1)) < 4.0

    def test_alpha_half_matches_inverse_gaussian(self):
        # CTS(1/2, beta, c) = IG(mu, lam) with mu = c sqrt(pi/beta), lam = 2 pi c^2
        beta, c = 1.4, 0.8
        x = sample_cts(CtsParams(0.5, beta, c), RngStream(5, 3), size=10**5)
        y = sample_inverse_gaussian(
            c * np.sqrt(np.pi / beta), 2.0 * np.pi * c**2, RngStream(5, 4), size=10**5
        )
        assert stats.ks_2samp(x, y).pvalue > 0.05

    @pytest.mark.parametrize(
        "params",
        [CtsParams(0.7, 1.4, 0.5), CtsParams(0.4, 1.0, 0.8)],
    )
    def test_tilting_matches_double_rejection(self, params):
        # overlapping range: tilting still terminates, double rejection active
        assert 0.02 < cts_tilting_acceptance(params) < 0.1
        a = sample_cts(params, RngStream(5, 5), size=10**5, method="tilting")
        b = sample_cts(params, RngStream(5, 6), size=10**5, method="double-rejection")
        assert stats.ks_2samp(a, b).pvalue > 0.01

    def test_double_rejection_moments(self):
        p = CtsParams(0.9, 1.4, 0.8)  # tilting acceptance ~1e-5: forced fallback
        x = sample_cts(p, RngStream(5, 7), size=2 * 10**5)
        for k in (1, 2):
            truth = p.c * p.beta ** (p.alpha - k) * gamma_fn(k - p.alpha)
            assert abs(z_score(x, truth, k)) < 4.0

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            sample_cts(CtsParams(0.5, 1.0, 1.0), RngStream(5, 8), method="magic")


class TestInverseGaussian:
    def test_mean(self):
        x = sample_inverse_gaussian(0.7, 1.3, RngStream(6, 1), size=10**6)
        assert abs(z_score(x, 0.7, 1)) < 4.0

    def test_variance(self):
        x = sample_inverse_gaussian(0.7, 1.3, RngStream(6, 2), size=10**6)
        assert abs(z_score(x, 0.7**3 / 1.3, 2)) < 4.0

    def test_concentration_limit(self):
        mu = 0.7
        x = sample_inverse_gaussian(mu, 1e6 * mu, RngStream(6, 3), size=10**4)
        assert x.std() < 0.01 * mu

    def test_parameter_domain(self):
        with pytest.raises(ValueError):
            sample_inverse_gaussian(-1.0, 1.0, RngStream(6, 4))


class TestReproducibility:
    def test_cloned_stream_identical_for_every_sampler(self):
        base = RngStream(9, 2)
        uniform(base, size=17)  # advance the counter away from the origin
        draws = []
        for _ in range(2):
            s = base.clone()
            draws.append(
                (
                    uniform(s, size=3),
                    sample_gamma(GammaLaw(0.5, 2.0), s, size=3),
                    sample_poisson(4.0, s, size=3),
                    sample_stable_subordinator(0.7, s, size=3),
                    sample_cts(CtsParams(0.5, 1.4, 0.8), s, size=3),
                    sample_inverse_gaussian(0.7, 1.3, s, size=3),
                )
            )
        for a, b in zip(*draws):
            assert np.array_equal(a, b)

    def test_first_two_moments_all_base_laws(self):
        # one batch-SE gate per sampler with finite first two moments
        n = 10**6
        cases = [
            (uniform(RngStream(10, 1), size=n), 0.5, 1.0 / 12.0),
            (sample_gamma(GammaLaw(2.0, 3.0), RngStream(10, 2), size=n), 2 / 3, 2 / 9),
            (
                sample_poisson(7.0, RngStream(10, 3), size=n).astype(float),
                7.0,
                7.0,
            ),
            (
                sample_cts(CtsParams(0.3, 1.4, 0.8), RngStream(10, 4), size=n),
                0.8 * 1.4 ** (0.3 - 1) * gamma_fn(0.7),
                0.8 * 1.4 ** (0.3 - 2) * gamma_fn(1.7),
            ),
            (
                sample_inverse_gaussian(0.5, 2.0, RngStream(10, 5), size=n),
                0.5,
                0.5**3 / 2.0,
            ),
        ]
        for x, m1, m2 in cases:
            assert abs(z_score(x, m1, 1)) < 4.0
            assert abs(z_score(x, m2, 2)) < 4.0
