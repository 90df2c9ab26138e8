import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from diagagg.core import RateEstimate
from diagagg.uncertainty import (
    BetaFitError,
    BetaParams,
    MonteCarloConfig,
    MonteCarloError,
    beta_cdf,
    fit_beta,
    fit_estimate,
    mc_samples,
    propagate_ci,
    sample_beta,
)

shape = st.floats(min_value=0.05, max_value=500.0, allow_nan=False)
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def cdf_misses(p, lo, med, hi):
    return [beta_cdf(x, p) - q for x, q in zip((lo, med, hi), (0.025, 0.5, 0.975))]


class TestCdf:
    def test_uniform(self):
        p = BetaParams(1.0, 1.0)
        for x in (0.0, 0.3, 1.0):
            assert beta_cdf(x, p) == pytest.approx(x, abs=1e-14)

    @pytest.mark.parametrize("a", [2.0, 5.0])
    def test_symmetric_median(self, a):
        assert beta_cdf(0.5, BetaParams(a, a)) == pytest.approx(0.5, abs=1e-14)

    def test_integer_closed_form(self):
        x = 0.3
        expected = 1 - (1 - x) ** 5 * (1 + 5 * x)
        assert beta_cdf(x, BetaParams(2.0, 5.0)) == pytest.approx(expected, abs=1e-14)
        assert expected == pytest.approx(0.5798, abs=1e-4)

    @settings(max_examples=300)
    @given(shape, shape, unit)
    def test_matches_scipy(self, a, b, x):
        assert beta_cdf(x, BetaParams(a, b)) == pytest.approx(special.betainc(a, b, x), abs=1e-10)

    @given(shape, shape)
    def test_monotone_with_fixed_ends(self, a, b):
        p = BetaParams(a, b)
        xs = np.linspace(0, 1, 201)
        v = beta_cdf(xs, p)
        assert v[0] == 0.0 and v[-1] == 1.0
        assert np.all(np.diff(v) >= -1e-15)

    def test_bad_params(self):
        with pytest.raises(ValueError):
            BetaParams(0.0, 1.0)
        with pytest.raises(ValueError):
            BetaParams(1.0, math.inf)


class TestFit:
    def test_symmetric(self):
        p = fit_beta(0.5, 0.2, 0.8)
        assert p.alpha == pytest.approx(p.beta, rel=0.01)
        assert p.residual <= 1e-4

    def test_abbott_antigen_sensitivity(self):
        p = fit_beta(0.748, 0.676, 0.808)
        assert max(abs(m) for m in cdf_misses(p, 0.676, 0.748, 0.808)) <= 0.005
        assert p.residual <= 1e-4

    def test_zero_width_rejected(self):
        with pytest.raises(BetaFitError):
            fit_beta(0.3, 0.3, 0.3)
        assert fit_estimate(RateEstimate(0.3, 0.3, 0.3)) is None
        assert fit_estimate(RateEstimate(0.3)) is None

    def test_order_checked(self):
        with pytest.raises(ValueError):
            fit_beta(0.3, 0.4, 0.5)

    def test_boundary_upper_endpoint(self):
        # Euroimmun specificity 100% (96.5-100%): median on the boundary
        p = fit_beta(1.0, 0.965, 1.0)
        assert p.beta == 1.0
        assert beta_cdf(0.965, p) == pytest.approx(0.025, abs=1e-12)
        # Abbott IgG sensitivity 83.1% (75.4-100%): interior median, boundary endpoint
        p = fit_beta(0.831, 0.754, 1.0)
        assert max(abs(m) for m in cdf_misses(p, 0.754, 0.831, 1.0 - 1e-6)) <= 0.03

    def test_boundary_lower_median(self):
        p = fit_beta(0.0, 0.0, 0.02)
        assert p.alpha == 1.0
        assert beta_cdf(0.02, p) == pytest.approx(0.975, abs=1e-12)

    def test_unfittable_rejected(self):
        # a median far outside the interval's centre is not reachable by any beta
        with pytest.raises(BetaFitError):
            fit_beta(0.5, 0.499, 0.99, max_residual=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.5, 200.0), st.floats(0.5, 200.0))
    def test_recovers_known_quantiles(self, a, b):
        lo, med, hi = stats.beta.ppf([0.025, 0.5, 0.975], a, b)
        if not 1e-6 < lo < hi < 1 - 1e-6:
            return
        p = fit_beta(med, lo, hi)
        assert max(abs(m) for m in cdf_misses(p, lo, med, hi)) <= 1e-3
        assert p.residual <= 1e-4

    def test_deterministic(self):
        assert fit_beta(0.7, 0.6, 0.8) == fit_beta(0.7, 0.6, 0.8)


class TestSampling:
    def test_uniform_mean(self):
        x = sample_beta(np.random.default_rng(1), BetaParams(1, 1), 100_000)
        assert abs(x.mean() - 0.5) <= 0.005

    def test_mean(self):
        p = BetaParams(2.0, 5.0)
        n = 100_000
        x = sample_beta(np.random.default_rng(2), p, n)
        sd = math.sqrt(2 * 5 / (7 ** 2 * 8))
        assert abs(x.mean() - 2 / 7) <= 3 * sd / math.sqrt(n)

    def test_reproducible(self):
        p = BetaParams(3.0, 4.0)
        a = sample_beta(np.random.default_rng(7), p, 100)
        b = sample_beta(np.random.default_rng(7), p, 100)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("a,b", [(0.3, 0.7), (2.0, 5.0), (40.0, 3.0), (0.05, 2.0), (500.0, 500.0)])
    def test_dkw_band(self, a, b):
        n = 100_000
        x = np.sort(sample_beta(np.random.default_rng(11), BetaParams(a, b), n))
        # Dvoretzky-Kiefer-Wolfowitz: sup |F_n - F| <= eps with probability 1 - 1e-6
        eps = math.sqrt(math.log(2 / 1e-6) / (2 * n))
        f = stats.beta.cdf(x, a, b)
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        assert max(np.max(emp_hi - f), np.max(f - emp_lo)) <= eps
        assert np.all((x >= 0) & (x <= 1))


class TestPropagation:
    def test_identity_reproduces_input(self):
        est = RateEstimate(0.748, 0.676, 0.808)
        out = propagate_ci([est], lambda d: d[0], MonteCarloConfig(n_samples=200_000))
        assert out.median == pytest.approx(0.748, abs=0.01)
        assert out.ci_low == pytest.approx(0.676, abs=0.01)
        assert out.ci_high == pytest.approx(0.808, abs=0.01)

    def test_constant(self):
        out = propagate_ci([RateEstimate(0.5, 0.4, 0.6)], lambda d: np.full(len(d[0]), 0.7),
                           MonteCarloConfig(n_samples=1000))
        assert (out.median, out.ci_low, out.ci_high) == (0.7, 0.7, 0.7)

    def test_exact_inputs_held_fixed(self):
        out = mc_samples([RateEstimate(0.3), RateEstimate(0.2, 0.1, 0.3)], lambda d: d[0],
                         MonteCarloConfig(n_samples=5000))
        assert np.all(out.values == 0.3)

    def test_threads_and_blocks(self):
        ins = [RateEstimate(0.6, 0.5, 0.7), RateEstimate(0.9, 0.85, 0.95)]
        fn = lambda d: d[0] * d[1]  # noqa: E731
        a = mc_samples(ins, fn, MonteCarloConfig(n_samples=100_003, seed=4, block_size=1 << 12))
        b = mc_samples(ins, fn, MonteCarloConfig(n_samples=100_003, seed=4, block_size=1 << 12, threads=3))
        c = mc_samples(ins, fn, MonteCarloConfig(n_samples=100_003, seed=5, block_size=1 << 12))
        assert len(a.values) == 100_003
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_rejection_redraws(self):
        ins = [RateEstimate(0.5, 0.1, 0.9)]

        def fn(d):
            return np.where(d[0] < 0.12, np.nan, d[0])

        # roughly 3.6% of draws fall below 0.12: too many for the default 1% budget
        with pytest.raises(MonteCarloError):
            mc_samples(ins, fn, MonteCarloConfig(n_samples=20_000))
        out = mc_samples(ins, fn, MonteCarloConfig(n_samples=20_000), max_reject=0.1)
        assert out.n_rejected > 0
        assert np.all(out.values >= 0.12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MonteCarloConfig(n_samples=0)
