"""Tests for the test constructors, the enhancement combinator, and the
string spec grammar."""

import math

import numpy as np
import pytest

from hdpower import (
    CalibrationError,
    DomainError,
    FixedDesignRegression,
    GaussianLocationModel,
    McConfig,
    SpecError,
    chi2_exact_power,
    chi2_euclidean_test,
    chi2_quantile,
    constant_test,
    enhance,
    estimate_rejection_prob,
    halfspace_test,
    make_test,
    noncentral_chi2_cdf,
    spike_alternative,
    spike_z_exact_power_at_spike,
    spike_z_exact_size,
    spike_z_test,
    std_normal_cdf,
    substream,
    sup_norm_exact_size,
    sup_norm_test,
    truncated_score_test,
    wald_test,
    wald_test_at_level,
)


def binom_3se(p: float, reps: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / reps)


class TestChi2EuclideanTest:
    def test_zero_statistic_accepts(self):
        test = chi2_euclidean_test(100, 10, 0.05)
        assert test.evaluate(np.zeros(10)) == 0.0

    def test_mc_size(self):
        n, d, alpha = 100, 10, 0.05
        test = chi2_euclidean_test(n, d, alpha)
        model = GaussianLocationModel(n=n, d=d)
        est = estimate_rejection_prob(test, model, np.zeros(d), McConfig(reps=20_000, master_seed=5))
        assert abs(est.mean - alpha) < binom_3se(alpha, est.reps)

    def test_mc_power_matches_noncentral_form(self):
        n, d, alpha = 64, 6, 0.05
        theta = np.array([0.3, -0.2, 0.0, 0.1, 0.0, 0.25])
        exact = chi2_exact_power(n, d, alpha, theta)
        test = chi2_euclidean_test(n, d, alpha)
        model = GaussianLocationModel(n=n, d=d)
        est = estimate_rejection_prob(test, model, theta, McConfig(reps=20_000, master_seed=6))
        assert abs(est.mean - exact) < binom_3se(exact, est.reps)

    def test_exact_power_is_noncentral_complement(self):
        lam = 64 * 0.09
        expected = 1.0 - noncentral_chi2_cdf(4, lam, chi2_quantile(4, 0.95))
        theta = np.array([0.3, 0.0, 0.0, 0.0])
        assert abs(chi2_exact_power(64, 4, 0.05, theta) - expected) < 1e-14

    def test_rejection_monotone_in_scaling(self):
        test = chi2_euclidean_test(50, 4, 0.1)
        rng = substream(3, "chi2-scaling")
        for z in rng.standard_normal((200, 4)) * 3:
            if test.evaluate(z) == 1.0:
                for c in (1.0, -1.5, 4.0):
                    assert test.evaluate(c * z) == 1.0

    def test_alpha_domain(self):
        with pytest.raises(DomainError):
            chi2_euclidean_test(10, 2, 1.0)


class TestSpikeZTest:
    def test_exact_size_at_log_d_eight(self):
        # d = ceil(e^8): threshold is (log d / 2)^{1/4} ~ sqrt(2)
        d = math.ceil(math.exp(8))
        assert abs(spike_z_exact_size(100, d) - 0.15729902422575417) < 1e-12
        assert abs(spike_z_exact_size(100, d) - 2.0 * std_normal_cdf(-math.sqrt(2))) < 1e-4

    def test_exact_power_at_log_d_eight(self):
        d = math.ceil(math.exp(8))
        assert abs(spike_z_exact_power_at_spike(100, d) - 0.7213106925645111) < 1e-12
        assert abs(spike_z_exact_power_at_spike(100, d) - 0.7214) < 1e-4

    def test_floor_threshold_small_d(self):
        # d < 3: sqrt(n) a_n = 1, threshold 1, size 2 Phi(-1)
        assert abs(spike_z_exact_size(25, 2) - 2.0 * std_normal_cdf(-1.0)) < 1e-14

    def test_exact_formulas_monotone_along_exp_grid(self):
        dims = [math.ceil(math.exp(k)) for k in range(2, 13)]
        sizes = [spike_z_exact_size(100, d) for d in dims]
        powers = [spike_z_exact_power_at_spike(100, d) for d in dims]
        assert all(b < a for a, b in zip(sizes, sizes[1:]))
        assert all(b > a for a, b in zip(powers, powers[1:]))

    def test_mc_matches_exact(self):
        n, d = 100, 55
        model = GaussianLocationModel(n=n, d=d)
        test = spike_z_test(n, d, 3)
        size = estimate_rejection_prob(test, model, np.zeros(d), McConfig(reps=20_000, master_seed=8))
        assert abs(size.mean - spike_z_exact_size(n, d)) < binom_3se(spike_z_exact_size(n, d), size.reps)
        power = estimate_rejection_prob(
            test, model, spike_alternative(n, d, 3).theta, McConfig(reps=20_000, master_seed=9)
        )
        exact = spike_z_exact_power_at_spike(n, d)
        assert abs(power.mean - exact) < binom_3se(exact, power.reps)

    def test_permutation_equivariance(self):
        # permuting coordinates of the statistic and the tested index together
        # leaves the rejection value unchanged
        n, d = 50, 6
        rng = substream(4, "spike-permutation")
        for _ in range(20):
            perm = rng.permutation(d)
            z = rng.standard_normal(d) * 2
            w = np.empty(d)
            w[perm] = z
            for i in range(1, d + 1):
                direct = spike_z_test(n, d, i).evaluate(z)
                mapped = spike_z_test(n, d, int(perm[i - 1]) + 1).evaluate(w)
                assert mapped == direct

    def test_coordinate_domain(self):
        with pytest.raises(DomainError):
            spike_z_test(10, 4, 5)


class TestSupNormTest:
    def test_exact_size_frozen(self):
        assert abs(sup_norm_exact_size(100) - 0.21411277625128955) < 1e-12

    def test_mc_matches_exact(self):
        n, d = 100, 100
        model = GaussianLocationModel(n=n, d=d)
        test = sup_norm_test(n, d)
        est = estimate_rejection_prob(test, model, np.zeros(d), McConfig(reps=20_000, master_seed=10))
        exact = sup_norm_exact_size(d)
        assert abs(est.mean - exact) < binom_3se(exact, est.reps)

    def test_union_bound_decreasing(self):
        bounds = [2 * d * std_normal_cdf(-math.sqrt(2 * math.log(d))) for d in (100, 1000, 10_000)]
        assert all(b < a for a, b in zip(bounds, bounds[1:]))

    def test_large_coordinate_rejects(self):
        d = 50
        z = np.zeros(d)
        z[17] = 2.0 * math.sqrt(2.0 * math.log(d))
        assert sup_norm_test(10, d).evaluate(z) == 1.0

    def test_needs_two_dimensions(self):
        with pytest.raises(DomainError):
            sup_norm_test(10, 1)


class TestEnhance:
    def test_clamp(self):
        phi = constant_test(3, 0.3)
        nu = constant_test(3, 0.9)
        psi = enhance(phi, nu)
        assert psi.evaluate(np.zeros(3)) == 1.0

    def test_zero_component_is_identity(self):
        phi = chi2_euclidean_test(20, 3, 0.1)
        psi = enhance(phi, constant_test(3, 0.0))
        rng = substream(5, "enhance-identity")
        z = rng.standard_normal((500, 3)) * 2
        assert np.array_equal(psi.evaluate_batch(z), phi.evaluate_batch(z))

    def test_idempotent_on_indicators(self):
        phi = chi2_euclidean_test(20, 3, 0.1)
        psi = enhance(phi, phi)
        rng = substream(6, "enhance-idempotent")
        z = rng.standard_normal((2_000, 3)) * 2
        assert np.array_equal(psi.evaluate_batch(z), phi.evaluate_batch(z))

    def test_monotone_in_component(self):
        phi = constant_test(2, 0.25)
        nu1 = constant_test(2, 0.1)
        nu2 = constant_test(2, 0.6)
        rng = substream(7, "enhance-monotone")
        z = rng.standard_normal((10_000, 2))
        low = enhance(phi, nu1).evaluate_batch(z)
        high = enhance(phi, nu2).evaluate_batch(z)
        assert np.all(low <= high)

    def test_size_subadditive_mc(self):
        n, d = 100, 100
        model = GaussianLocationModel(n=n, d=d)
        phi = chi2_euclidean_test(n, d, 0.05)
        nu = spike_z_test(n, d, 1)
        psi = enhance(phi, nu)
        mc = McConfig(reps=100_000, master_seed=11)
        # same tag = same draws, so the pointwise inequality transfers
        s_phi = estimate_rejection_prob(phi, model, np.zeros(d), mc, tag="sub")
        s_nu = estimate_rejection_prob(nu, model, np.zeros(d), mc, tag="sub")
        s_psi = estimate_rejection_prob(psi, model, np.zeros(d), mc, tag="sub")
        assert s_psi.mean <= s_phi.mean + s_nu.mean + 1e-12
        assert s_psi.mean >= max(s_phi.mean, s_nu.mean) - 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            enhance(constant_test(2), constant_test(3))


class TestRangeInvariant:
    def test_all_tests_stay_in_unit_interval_on_extremes(self):
        n, d = 64, 8
        tests = [
            chi2_euclidean_test(n, d, 0.05),
            spike_z_test(n, d, 2),
            sup_norm_test(n, d),
            halfspace_test(n, d, 0.05, seed=3),
            constant_test(d),
            enhance(chi2_euclidean_test(n, d, 0.05), spike_z_test(n, d, 1)),
        ]
        rng = substream(8, "range-extremes")
        z = rng.standard_normal((10_000, d))
        z[:100] *= 1e8
        z[100:200] = -1e8
        for test in tests:
            vals = test.evaluate_batch(z)
            assert np.all((vals >= 0.0) & (vals <= 1.0))
            assert np.all(np.isfinite(vals))

    def test_observation_tests_stay_in_unit_interval_on_extremes(self):
        gauss = GaussianLocationModel(n=6, d=3)
        tscore = truncated_score_test(gauss, 0.05, calibration=McConfig(reps=100_000, master_seed=0))
        reg = FixedDesignRegression.default_design(n=6, d=2)
        wald = wald_test_at_level(reg, 0.05)
        rng = substream(17, "obs-extremes")
        x = rng.standard_normal((2_000, 6, 3))
        x[:50] *= 1e8
        vals = tscore.evaluate_batch(x)
        assert np.all((vals >= 0.0) & (vals <= 1.0))
        y = rng.standard_normal((2_000, 6))
        y[:50] = 1e8
        vals = wald.evaluate_batch(y)
        assert np.all((vals >= 0.0) & (vals <= 1.0))


class TestTruncatedScore:
    def test_untruncated_d1_is_z_test(self):
        model = GaussianLocationModel(n=20, d=1)
        test = truncated_score_test(model, 0.05, C=math.inf, calibration=McConfig(reps=1_000_000, master_seed=0))
        est = estimate_rejection_prob(test, model, np.zeros(1), McConfig(reps=100_000, master_seed=12))
        assert abs(est.mean - 0.05) < 0.003

    def test_default_radius_null_rate(self):
        model = GaussianLocationModel(n=50, d=2)
        test = truncated_score_test(model, 0.05, calibration=McConfig(reps=1_000_000, master_seed=0))
        assert "C=4.24264" in test.name
        # validation uses a fresh seed, independent of the calibration stream
        est = estimate_rejection_prob(test, model, np.zeros(2), McConfig(reps=100_000, master_seed=13))
        assert abs(est.mean - 0.05) < binom_3se(0.05, est.reps)

    def test_tiny_radius_raises_calibration_error(self):
        model = GaussianLocationModel(n=20, d=4)
        with pytest.raises(CalibrationError):
            truncated_score_test(model, 0.05, C=1e-3)

    def test_consumes_observations(self):
        model = GaussianLocationModel(n=10, d=2)
        test = truncated_score_test(model, 0.05, calibration=McConfig(reps=100_000, master_seed=0))
        assert test.consumes == "observations"
        value = test.evaluate(np.zeros((10, 2)))
        assert value in (0.0, 1.0)

    def test_truncated_mean_shift_lower_bound(self):
        # the norm of the truncated-score mean shift stays proportional to
        # ||theta|| near the null (verified numerically on a grid; with the
        # default radius the truncation loses almost no mass)
        d = 2
        C = 3.0 * math.sqrt(d)
        rng = substream(16, "truncated-mean-shift")
        for magnitude in (0.1, 0.3, 0.5):
            x = rng.standard_normal((200_000, d))
            x[:, 0] += magnitude
            keep = (np.einsum("ij,ij->i", x, x) <= C * C).astype(float)
            shifted_mean = (x * keep[:, None]).mean(axis=0)
            assert np.linalg.norm(shifted_mean) >= 0.8 * magnitude


class TestWald:
    def test_zero_threshold_always_rejects(self):
        model = FixedDesignRegression.default_design(n=20, d=2)
        test = wald_test(model, 0.0)
        rng = substream(9, "wald-zero")
        y = rng.standard_normal((200, 20))
        assert np.all(test.evaluate_batch(y) == 1.0)

    def test_exact_size(self):
        model = FixedDesignRegression.default_design(n=100, d=5)
        test = wald_test_at_level(model, 0.05)
        est = estimate_rejection_prob(test, model, np.zeros(5), McConfig(reps=100_000, master_seed=14))
        assert abs(est.mean - 0.05) < 0.003

    def test_power_against_strong_signal(self):
        model = FixedDesignRegression.default_design(n=100, d=5)
        test = wald_test_at_level(model, 0.05)
        theta = np.zeros(5)
        theta[0] = 1.0  # sqrt(n) ||theta|| = 10
        exact = 1.0 - noncentral_chi2_cdf(5, 100.0, chi2_quantile(5, 0.95))
        assert exact >= 0.999
        est = estimate_rejection_prob(test, model, theta, McConfig(reps=20_000, master_seed=15))
        assert abs(est.mean - exact) <= 3 * est.se + 1e-6

    def test_negative_threshold_rejected(self):
        model = FixedDesignRegression.default_design(n=10, d=2)
        with pytest.raises(DomainError):
            wald_test(model, -1.0)


class TestSpecGrammar:
    def test_basic_specs(self):
        assert make_test("chi2:alpha=0.05", 100, 10).name == "chi2(alpha=0.05)"
        assert make_test("spike:i=3", 100, 10).name == "spike(i=3)"
        assert make_test("supnorm", 100, 10).name == "supnorm"
        assert make_test("one", 100, 10).name == "one"
        assert make_test("halfspace:alpha=0.1,seed=7", 100, 10).calibration_seed == 7

    def test_enhance_composition(self):
        test = make_test("enhance(chi2:alpha=0.05,supnorm)", 100, 10)
        assert test.name == "enhance(chi2(alpha=0.05),supnorm)"
        nested = make_test("enhance(enhance(chi2:alpha=0.05,supnorm),spike:i=2)", 100, 10)
        assert nested.dim == 10

    def test_wald_requires_regression_model(self):
        with pytest.raises(SpecError):
            make_test("wald:alpha=0.05", 100, 5)
        model = FixedDesignRegression.default_design(n=100, d=5)
        assert make_test("wald:alpha=0.05", 100, 5, model=model).dim == 100

    def test_unknown_name(self):
        with pytest.raises(SpecError):
            make_test("bonferroni", 100, 10)

    def test_unknown_option(self):
        with pytest.raises(SpecError):
            make_test("chi2:beta=0.05", 100, 10)

    def test_malformed_enhance(self):
        with pytest.raises(SpecError):
            make_test("enhance(chi2:alpha=0.05)", 100, 10)

    def test_bad_alpha_is_domain_error(self):
        with pytest.raises(DomainError):
            make_test("chi2:alpha=1.5", 100, 10)
