"""Pooled prevalence estimation and its variance trade-off."""

import math

import numpy as np
import pytest

from poolkit import prevalence
from poolkit.rng import make_stream
from poolkit.types import ValidationError


class TestEstimator:
    def test_k_one_is_raw_fraction(self):
        est = prevalence.estimate_prevalence(1, 200, 37)
        assert est.rho_hat == 37 / 200  # bit-exact, not approximate
        assert est.std_pooled == pytest.approx(est.std_individual)
        assert est.std_individual == pytest.approx(
            math.sqrt(est.rho_hat * (1 - est.rho_hat)))

    def test_zero_positives(self):
        est = prevalence.estimate_prevalence(5, 50, 0)
        assert est.rho_hat == 0.0
        assert est.warning is not None

    def test_all_positive_saturates(self):
        est = prevalence.estimate_prevalence(5, 50, 50)
        assert est.rho_hat == 1.0
        assert "saturates" in est.warning

    def test_formula_value(self):
        est = prevalence.estimate_prevalence(10, 100, 50)
        assert est.rho_hat == pytest.approx(1 - 0.5 ** 0.1)
        assert est.rho_hat == pytest.approx(0.066967, abs=1e-6)

    def test_monotone_in_positives(self):
        values = [prevalence.estimate_prevalence(8, 100, k).rho_hat
                  for k in range(0, 101)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_validation(self):
        with pytest.raises(ValidationError):
            prevalence.estimate_prevalence(0, 10, 1)
        with pytest.raises(ValidationError):
            prevalence.estimate_prevalence(2, 10, 11)


class TestRecommendedPoolSize:
    def test_values(self):
        assert prevalence.recommended_pool_size(0.1) == 9
        assert prevalence.recommended_pool_size(0.5) == 1
        assert prevalence.recommended_pool_size(0.01) == 99

    def test_bounds(self):
        with pytest.raises(ValidationError):
            prevalence.recommended_pool_size(0.0)


class TestVarianceComparison:
    def test_pooled_beats_individual_below_threshold(self):
        # Grid over (0.001, 0.36) with the recommended pool size.
        for rho in np.linspace(0.001, 0.36, 60):
            k = prevalence.recommended_pool_size(float(rho))
            pooled = prevalence.pooled_noise_scale(float(rho), k)
            individual = math.sqrt(rho * (1 - rho))
            assert pooled <= individual + 1e-12

    def test_monte_carlo_matches_delta_method(self):
        rho, k, pools = 0.01, 69, 10_000
        q = 1 - (1 - rho) ** k
        rng = make_stream(29)
        reps = 3000
        positives = rng.binomial(pools, q, size=reps)
        estimates = 1 - (1 - positives / pools) ** (1 / k)
        alpha = prevalence.pooled_noise_scale(rho, k)
        predicted = alpha / math.sqrt(pools)
        assert abs(estimates.mean() - rho) <= 3 * predicted
        assert abs(estimates.std(ddof=1) - predicted) / predicted < 0.15
