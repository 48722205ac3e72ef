"""Core test model and information scores against literal enumeration."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import (
    brute_conditional_entropy,
    brute_expected_confidence,
    dense_prior,
)
from poolkit import model
from poolkit.types import (
    CapacityError,
    DesignMatrix,
    DimensionError,
    PoolDesign,
    Prior,
    Secret,
    SecretDistribution,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
)

CHARS = TestCharacteristics(tpr=0.99, tnr=0.9)


class TestOutcomeLikelihood:
    def test_hit_positive_is_tpr(self):
        v = model.outcome_likelihood(PoolDesign("1010"), Secret("1000"), 1, CHARS)
        assert v == 0.99

    def test_empty_pool_negative_is_tnr(self):
        v = model.outcome_likelihood(PoolDesign("0000"), Secret("1011"), 0, CHARS)
        assert v == 0.9

    def test_clean_pool_positive_is_false_positive_rate(self):
        v = model.outcome_likelihood(PoolDesign("0110"), Secret("1001"), 1, CHARS)
        assert v == pytest.approx(0.1)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            model.outcome_likelihood(PoolDesign("10"), Secret("100"), 1, CHARS)


class TestPosteriorUpdate:
    def test_single_patient_bayes(self):
        # Direct Bayes over the two secrets: 0.99*0.1 / (0.99*0.1 + 0.1*0.9).
        post = model.posterior_update(Prior([0.1]), DesignMatrix(["1"]),
                                      TestOutcome([1]), CHARS)
        assert post.probs[1] == pytest.approx(0.099 / 0.189)
        assert post.probs[1] == pytest.approx(0.523810, abs=1e-6)

    def test_perfect_negative_pool_collapses(self):
        perfect = TestCharacteristics(1.0, 1.0)
        post = model.posterior_update(Prior([0.3, 0.4]), DesignMatrix(["11"]),
                                      TestOutcome([0]), perfect)
        assert post.probs[0] == pytest.approx(1.0)

    def test_commutative_and_compositional(self):
        prior = Prior([0.2, 0.1, 0.3])
        d1, d2 = DesignMatrix(["110"]), DesignMatrix(["011"])
        both = DesignMatrix(["110", "011"])
        a = model.posterior_update(
            model.posterior_update(prior, d1, TestOutcome([1]), CHARS),
            d2, TestOutcome([0]), CHARS)
        b = model.posterior_update(
            model.posterior_update(prior, d2, TestOutcome([0]), CHARS),
            d1, TestOutcome([1]), CHARS)
        c = model.posterior_update(prior, both, TestOutcome([1, 0]), CHARS)
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-15)
        np.testing.assert_allclose(a.probs, c.probs, atol=1e-15)

    def test_outcome_length_checked(self):
        with pytest.raises(DimensionError):
            model.posterior_update(Prior([0.1]), DesignMatrix(["1"]),
                                   TestOutcome([1, 0]), CHARS)

    @given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=5),
           st.data())
    @settings(max_examples=50, deadline=None)
    def test_normalization_property(self, probs, data):
        prior = Prior(probs)
        n = prior.n
        rows = data.draw(st.lists(st.integers(0, (1 << n) - 1), min_size=1, max_size=3))
        bits = data.draw(st.lists(st.integers(0, 1), min_size=len(rows),
                                  max_size=len(rows)))
        post = model.posterior_update(prior, DesignMatrix.from_row_ints(rows, n),
                                      TestOutcome(bits), CHARS)
        assert abs(post.probs.sum() - 1.0) < 1e-9


class TestEntropy:
    def test_uniform_three_bits(self):
        assert model.entropy(Prior([0.5] * 3)) == pytest.approx(3.0)

    def test_degenerate_zero(self):
        assert model.entropy(Prior([0.0, 0.0])) == 0.0

    def test_two_patient_value(self):
        # Enumerating the 4 secrets of p = (0.1, 0.2) by hand.
        expected = -sum(p * math.log2(p) for p in
                        (0.9 * 0.8, 0.9 * 0.2, 0.1 * 0.8, 0.1 * 0.2))
        assert expected == pytest.approx(1.190924, abs=1e-6)
        assert model.entropy(Prior([0.1, 0.2])) == pytest.approx(expected)

    def test_unnormalized_rejected(self):
        with pytest.raises(ValidationError):
            model.entropy(SecretDistribution(1, np.array([0.6, 0.6])))

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=7))
    @settings(max_examples=60, deadline=None)
    def test_factorizes_over_independent_patients(self, probs):
        prior = Prior(probs)
        split = sum(float(model.binary_entropy(p)) for p in probs)
        assert model.entropy(prior) == pytest.approx(split, abs=1e-9)


class TestConditionalEntropy:
    def test_empty_design_returns_prior_entropy(self):
        prior = Prior([0.3, 0.2])
        assert model.conditional_entropy(prior, DesignMatrix([]), CHARS) == \
            pytest.approx(model.entropy(prior))

    def test_perfect_single_patient(self):
        perfect = TestCharacteristics(1.0, 1.0)
        v = model.conditional_entropy(Prior([0.5]), DesignMatrix(["1"]), perfect)
        assert v == pytest.approx(0.0, abs=1e-12)

    def test_noisy_single_patient(self):
        chars = TestCharacteristics(0.9, 0.9)
        # Two secrets x two outcomes by hand: posterior entropy is
        # H_b(0.9) for either outcome.
        v = model.conditional_entropy(Prior([0.5]), DesignMatrix(["1"]), chars)
        assert v == pytest.approx(float(model.binary_entropy(0.9)), abs=1e-12)
        assert v == pytest.approx(0.469, abs=5e-4)

    def test_matches_literal_enumeration(self):
        prior = Prior([0.15, 0.4, 0.05])
        design = DesignMatrix(["110", "011", "101"])
        expected = brute_conditional_entropy(dense_prior(prior), design, CHARS)
        assert model.conditional_entropy(prior, design, CHARS) == \
            pytest.approx(expected, abs=1e-10)

    def test_capacity_guard(self):
        with pytest.raises(CapacityError):
            model.conditional_entropy(
                Prior([0.1]), DesignMatrix.from_row_ints([1] * 21, 1), CHARS)

    def test_information_never_hurts(self):
        prior = Prior([0.1, 0.35, 0.6])
        h = model.entropy(prior)
        for rows in itertools.combinations(range(8), 2):
            cond = model.conditional_entropy(
                prior, DesignMatrix.from_row_ints(rows, 3), CHARS)
            assert -1e-12 <= cond <= h + 1e-12


class TestMutualInformation:
    def test_empty_zero(self):
        assert model.mutual_information(Prior([0.2]), DesignMatrix([]), CHARS) == 0.0

    def test_perfect_bit(self):
        perfect = TestCharacteristics(1.0, 1.0)
        v = model.mutual_information(Prior([0.5]), DesignMatrix(["1"]), perfect)
        assert v == pytest.approx(1.0)

    def test_noisy_bit(self):
        chars = TestCharacteristics(0.9, 0.9)
        v = model.mutual_information(Prior([0.5]), DesignMatrix(["1"]), chars)
        assert v == pytest.approx(1.0 - float(model.binary_entropy(0.9)), abs=1e-12)
        assert v == pytest.approx(0.531, abs=5e-4)

    def test_monotone_in_design_inclusion(self):
        prior = Prior([0.12, 0.3, 0.25])
        rng = np.random.default_rng(7)
        for _ in range(25):
            small = rng.integers(0, 8, size=2)
            extra = rng.integers(0, 8, size=1)
            i_small = model.mutual_information(
                prior, DesignMatrix.from_row_ints(small, 3), CHARS)
            i_big = model.mutual_information(
                prior, DesignMatrix.from_row_ints(list(small) + list(extra), 3), CHARS)
            assert i_big >= i_small - 1e-9


class TestExpectedConfidence:
    def test_no_tests_is_prior_mode(self):
        assert model.expected_confidence(Prior([0.1]), DesignMatrix([]), CHARS) == \
            pytest.approx(0.9)

    def test_perfect_single(self):
        perfect = TestCharacteristics(1.0, 1.0)
        assert model.expected_confidence(Prior([0.5]), DesignMatrix(["1"]), perfect) \
            == pytest.approx(1.0)

    def test_leave_one_out_value(self):
        # Brute force over 8 secrets x 8 outcomes (independent route below).
        chars = TestCharacteristics(tpr=0.95, tnr=0.99)
        prior = Prior([0.1] * 3)
        design = DesignMatrix(["011", "101", "110"])
        expected = brute_expected_confidence(dense_prior(prior), design, chars)
        got = model.expected_confidence(prior, design, chars)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.953614, abs=1e-6)

    def test_duplicate_row_never_hurts(self):
        prior = Prior([0.2, 0.4])
        base = DesignMatrix(["10", "11"])
        longer = DesignMatrix(["10", "11", "11"])
        assert model.expected_confidence(prior, longer, CHARS) >= \
            model.expected_confidence(prior, base, CHARS) - 1e-12


class TestMlDecode:
    def test_point_mass(self):
        dist = SecretDistribution(2, np.array([0.0, 0.0, 1.0, 0.0]))
        secret, confidence = model.ml_decode(dist)
        assert str(secret) == "10"
        assert confidence == 1.0

    def test_tie_breaks_lexicographically(self):
        dist = SecretDistribution(2, np.array([0.0, 0.5, 0.5, 0.0]))
        secret, confidence = model.ml_decode(dist)
        assert str(secret) == "01"
        assert confidence == 0.5

    def test_posterior_example(self):
        post = model.posterior_update(Prior([0.1]), DesignMatrix(["1"]),
                                      TestOutcome([1]), CHARS)
        secret, confidence = model.ml_decode(post)
        assert str(secret) == "1"
        assert confidence == pytest.approx(0.523810, abs=1e-6)


class TestSingleTestInformation:
    def test_matches_design_route(self):
        # One pooled test at hit probability rho == one-patient design at
        # prior rho: both are the same two-by-two channel.
        for rho in (0.05, 0.3, 0.5, 0.9):
            via_design = model.mutual_information(
                Prior([rho]), DesignMatrix(["1"]), CHARS)
            assert model.single_test_information(rho, CHARS) == \
                pytest.approx(via_design, abs=1e-12)

    def test_boundary_zero(self):
        assert model.single_test_information(0.0, CHARS) == pytest.approx(0.0)
        assert model.single_test_information(1.0, CHARS) == pytest.approx(0.0)
