"""Power-law fit and length-scale estimate tests."""

import math

import numpy as np
import pytest

from acnudge.analysis import count_structures, estimate_length_scale, fit_power_law
from acnudge.solver import Field, SolverConfig


class TestFitPowerLaw:
    def test_exact_power_law_recovered(self):
        xs = [1e-4, 1e-3, 1e-2, 1e-1]
        pairs = [(x, 2.0 * x**-0.5) for x in xs]
        fit = fit_power_law(pairs)
        assert abs(fit.c0 - 2.0) < 1e-12
        assert abs(fit.p - 0.5) < 1e-12
        assert fit.log_residual_std < 1e-10
        assert fit.n_points == 4

    def test_repeated_x_values_allowed(self):
        pairs = [(1e-3, 10), (1e-3, 12), (1e-2, 4), (1e-1, 1)]
        fit = fit_power_law(pairs)
        assert fit.n_points == 4

    def test_needs_three_distinct_x(self):
        with pytest.raises(ValueError, match="distinct"):
            fit_power_law([(1e-3, 10), (1e-3, 12), (1e-2, 4)])

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            fit_power_law([(1e-3, 10), (0.0, 4), (1e-1, 1)])
        with pytest.raises(ValueError):
            fit_power_law([(1e-3, 10), (1e-2, -4), (1e-1, 1)])

    def test_scale_covariance(self):
        rng = np.random.default_rng(0)
        xs = np.geomspace(1e-5, 1e-2, 12)
        ys = 0.2 * xs**-0.53 * np.exp(0.1 * rng.standard_normal(12))
        base = fit_power_law(list(zip(xs, ys)))
        scaled = fit_power_law(list(zip(xs, 7.0 * ys)))
        assert abs(scaled.c0 - 7.0 * base.c0) < 1e-12 * scaled.c0
        assert abs(scaled.p - base.p) < 1e-12

    def test_noisy_recovery_within_three_standard_errors(self):
        rng = np.random.default_rng(123)
        xs = np.geomspace(1e-6, 1e-2, 40)
        sigma = 0.15
        ys = 2.0 * xs**-0.5 * np.exp(sigma * rng.standard_normal(xs.size))
        fit = fit_power_law(list(zip(xs, ys)))
        logx = np.log(xs)
        se_slope = sigma / (math.sqrt(xs.size) * np.std(logx))
        assert abs(fit.p - 0.5) <= 3.0 * se_slope
        se_intercept = sigma / math.sqrt(xs.size) * math.sqrt(1.0 + np.mean(logx) ** 2 / np.var(logx))
        assert abs(math.log(fit.c0) - math.log(2.0)) <= 3.0 * se_intercept


class TestLengthScale:
    def _fit(self):
        return fit_power_law([(x, 2.0 * x**-0.5) for x in (1e-5, 1e-4, 1e-3, 1e-2)])

    def test_clean_numbers(self):
        est = estimate_length_scale(self._fit(), nu=1e-4, L=1.0)
        assert abs(est.lam - 1e-2) < 1e-12
        assert est.n_s == 100
        assert not est.extrapolated

    def test_lambda_times_ns_close_to_domain(self):
        fit = self._fit()
        for nu in (1e-5, 3e-4, 1e-2):
            est = estimate_length_scale(fit, nu, L=1.0)
            assert abs(est.lam * est.n_s - 1.0) <= est.lam

    def test_monotone_in_nu(self):
        fit = self._fit()
        lams = [estimate_length_scale(fit, nu).lam for nu in (1e-5, 1e-4, 1e-3)]
        assert lams[0] < lams[1] < lams[2]

    def test_extrapolation_flagged(self):
        fit = self._fit()
        assert estimate_length_scale(fit, 1e-7).extrapolated
        assert estimate_length_scale(fit, 0.5).extrapolated
        assert not estimate_length_scale(fit, 1e-3).extrapolated


def trapezoid_plateaus(n_points, n_plateaus, amplitude=1.0):
    width = (n_points + 1) // n_plateaus
    values = np.empty(n_points + 1)
    for j in range(n_plateaus):
        lo = j * width
        hi = (j + 1) * width if j < n_plateaus - 1 else n_points + 1
        values[lo:hi] = amplitude if j % 2 == 0 else -amplitude
    for j in range(1, n_plateaus):
        b = j * width
        sign = 1.0 if (j - 1) % 2 == 0 else -1.0
        values[b - 1] = sign * amplitude / 3.0
        values[b] = -sign * amplitude / 3.0
    return Field(values)


class TestCountStructures:
    def test_single_bump(self):
        x = np.linspace(0.0, 1.0, 65)
        assert count_structures(Field(np.sin(np.pi * x))) == 1

    def test_six_plateaus(self):
        assert count_structures(trapezoid_plateaus(95, 6)) == 6

    def test_zero_field(self):
        assert count_structures(Field(np.zeros(65))) == 0

    def test_small_wiggles_ignored(self):
        # plateaus at 0.3 stay below the 0.5/sqrt(alpha) cutoff
        assert count_structures(trapezoid_plateaus(95, 6, amplitude=0.3)) == 0

    def test_alpha_scales_threshold(self):
        # amplitude 0.3 counts once the saturation scale drops to 1/sqrt(4)
        assert count_structures(trapezoid_plateaus(95, 6, amplitude=0.3), alpha=4.0) == 6

    def test_fewer_structures_at_larger_viscosity(self):
        from acnudge.experiments import spin_up_reference

        coarse = SolverConfig(nu=1e-3, n_points=1024)
        fine = SolverConfig(nu=1e-4, n_points=1024)
        seed = 0
        n_coarse = count_structures(spin_up_reference(coarse, seed, t_cap=20.0), coarse.alpha)
        n_fine = count_structures(spin_up_reference(fine, seed, t_cap=20.0), fine.alpha)
        assert n_fine > n_coarse