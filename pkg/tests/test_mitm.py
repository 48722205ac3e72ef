"""Certified meet-in-the-middle decoder against the exact oracle."""

import math

import numpy as np
import pytest

from poolkit import bloom, mitm, oracle
from poolkit.rng import make_stream
from poolkit.simulate import simulate_outcome
from poolkit.types import (
    CapacityError,
    DesignMatrix,
    NoPlausibleExplanationError,
    Prior,
    Secret,
    StaleCacheError,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
)

CHARS = TestCharacteristics(0.99, 0.9)


class TestChooseK:
    def test_epsilon_at_least_one(self):
        assert mitm.choose_k(10, 0.1, 1.0) == 0
        assert mitm.choose_k(10, 0.1, 2.0) == 0

    def test_direct_tail_summation(self):
        n, p, eps = 10, 0.1, 1e-6
        k = mitm.choose_k(n, p, eps)
        tail = lambda kk: sum(math.comb(n, j) * p**j * (1 - p)**(n - j)
                              for j in range(kk, n + 1))
        assert tail(k) < eps
        assert tail(k - 1) >= eps

    def test_illustrative_scale(self):
        # At n=60, p=0.001 both candidate sparsity cutoffs leave tails
        # far below 5e-6; seven-or-fewer positives already cover all but
        # ~4e-13 of the prior mass.
        assert mitm.binomial_tail(60, 0.001, 7) < 5e-6
        assert mitm.binomial_tail(60, 0.001, 8) < 5e-6
        A = sum(math.comb(60, i) for i in range(7))
        assert A < 6e7

    def test_per_patient_priors_use_max(self):
        k_scalar = mitm.choose_k(8, 0.2, 1e-6)
        k_vector = mitm.choose_k(8, np.array([0.01, 0.2, 0.05] + [0.01] * 5), 1e-6)
        assert k_vector == k_scalar

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError):
            mitm.choose_k(5, 1.0, 1e-3)
        with pytest.raises(ValidationError):
            mitm.choose_k(5, 0.1, 0.0)


class TestPreprocess:
    def test_k_one_single_entry(self):
        design = DesignMatrix(["110", "011"])
        table = mitm.mitm_preprocess(design, 0.01, 1e-8, k=1)
        assert table.stored_codes == 1
        assert table.codes[0] == 0
        assert table.mass[0] == pytest.approx(0.99 ** 3)
        assert np.all(table.joint == 0.0)

    def test_full_enumeration_matches_oracle(self):
        design = DesignMatrix(["110", "011", "101"])
        prior = Prior([0.2, 0.1, 0.3])
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-8, k=4)
        assert table.mass.sum() == pytest.approx(1.0)
        # Per-code masses equal sums of the prior over secrets encoding there.
        dist = prior.distribution()
        for code, mass in zip(table.codes, table.mass):
            total = 0.0
            for s in range(8):
                c = 0
                for r, row in enumerate(design.rows):
                    c |= ((row.index & s) != 0) << (design.m - 1 - r)
                if c == code:
                    total += dist.probs[s]
            assert mass == pytest.approx(total, abs=1e-15)

    def test_identical_codes_accumulate(self):
        # Two single-positive secrets behind the same pool share a code.
        design = DesignMatrix(["110"])
        table = mitm.mitm_preprocess(design, 0.1, 1e-8, k=2)
        idx = {int(c): i for i, c in enumerate(table.codes)}
        assert table.stored_codes == 2
        assert table.mass[idx[1]] == pytest.approx(2 * 0.1 * 0.9 * 0.9)

    def test_joint_never_exceeds_mass(self):
        design = DesignMatrix(["11000", "00110", "10011"])
        table = mitm.mitm_preprocess(design, 0.07, 1e-8)
        assert np.all(table.joint <= table.mass[:, None] + 1e-15)
        assert table.mass.sum() <= 1.0 + 1e-12

    def test_enumeration_cap(self):
        design = DesignMatrix.from_row_ints([1] * 3, 30)
        with pytest.raises(CapacityError):
            mitm.mitm_preprocess(design, 0.4, 1e-12, enumeration_cap=1000)

    def test_dense_and_combination_paths_agree(self):
        design = DesignMatrix(["1100", "0110", "0011", "1001"])
        priors = np.array([0.02, 0.05, 0.01, 0.03])
        dense = mitm._preprocess_dense(design, priors, 3)
        combo = mitm._preprocess_combos(design, priors, 3)
        np.testing.assert_array_equal(dense[0], combo[0])
        np.testing.assert_allclose(dense[1], combo[1], atol=1e-15)
        np.testing.assert_allclose(dense[2], combo[2], atol=1e-15)

    def test_table_determinism(self, tmp_path):
        design = DesignMatrix(["1010", "0101", "1100"])
        paths = []
        for run in range(2):
            table = mitm.mitm_preprocess(design, 0.03, 1e-8)
            path = tmp_path / f"t{run}.bin"
            mitm.save_table(table, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]


class TestQuery:
    def test_matches_exact_oracle_small(self):
        rng = make_stream(17)
        prior = Prior([0.02] * 8)
        layout = bloom.build_layout(8, 2, 2, seed=4)
        design = layout.to_design_matrix()
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-8)
        for _ in range(40):
            secret = Secret((rng.random(8) < 0.02).astype(int).tolist())
            outcome = simulate_outcome(design, secret, CHARS, rng)
            answer = mitm.mitm_query(table, outcome, CHARS)
            exact = oracle.exact_posterior(prior, design, outcome, CHARS)
            err = np.abs(np.asarray(answer.marginals) - np.asarray(exact.marginals))
            assert err.max() <= answer.error_bound
            assert answer.evidence_mass <= 1.0 + 1e-12

    def test_underestimates_evidence(self):
        prior = Prior([0.05] * 6)
        design = DesignMatrix(["110000", "001100", "000011", "100100"])
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-6)
        dist = prior.distribution()
        rng = make_stream(23)
        from poolkit import model

        for _ in range(20):
            outcome = TestOutcome((rng.random(4) < 0.5).astype(int).tolist())
            weights = dist.probs.copy()
            for row, t in zip(design.rows, outcome.bits):
                weights = weights * model._row_likelihoods(6, row.index, t, CHARS)
            exact_mass = float(weights.sum())
            answer = mitm.mitm_query(table, outcome, CHARS)
            assert answer.evidence_mass <= exact_mass + 1e-15

    def test_branches_agree(self):
        prior = Prior([0.03] * 7)
        design = DesignMatrix(["1110000", "0011100", "0000111", "1001001"])
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-8)
        outcome = TestOutcome("1010")
        stored = mitm._query_stored(table, outcome.index, 2, 2, CHARS, table.epsilon)
        enum = mitm._query_corruptions(table, outcome.index, 2, 2, CHARS,
                                       math.log(table.epsilon))
        np.testing.assert_allclose(stored[0], enum[0], atol=1e-12)
        assert stored[1] == pytest.approx(enum[1], abs=1e-12)

    def test_near_perfect_tests_single_pattern(self):
        near = TestCharacteristics(tpr=1 - 1e-12, tnr=1 - 1e-12)
        design = DesignMatrix(["1100", "0011"])
        prior = Prior([0.05] * 4)
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-8)
        code = int(table.codes[1])
        outcome = TestOutcome.from_index(code, 2)
        answer = mitm.mitm_query(table, outcome, near)
        pos = {int(c): i for i, c in enumerate(table.codes)}[code]
        expected = table.joint[pos] / table.mass[pos]
        np.testing.assert_allclose(answer.marginals, expected, atol=1e-9)

    def test_positive_evidence_monotone(self):
        prior = Prior([0.02] * 4)
        design = DesignMatrix(["1100", "0011"])
        table = mitm.mitm_preprocess(design, prior.as_array(), 1e-10)
        low = mitm.mitm_query(table, TestOutcome("00"), CHARS)
        high = mitm.mitm_query(table, TestOutcome("10"), CHARS)
        assert high.marginals[0] >= low.marginals[0]

    def test_no_plausible_explanation(self):
        design = DesignMatrix(["1111"])
        table = mitm.mitm_preprocess(design, 0.001, 1e-2, k=1)
        near = TestCharacteristics(tpr=1 - 1e-9, tnr=1 - 1e-9)
        with pytest.raises(NoPlausibleExplanationError) as info:
            mitm.mitm_query(table, TestOutcome("1"), near)
        assert info.value.stored_codes == 1

    def test_cutoff_fallback_recovers(self):
        design = DesignMatrix(["1111"])
        table = mitm.mitm_preprocess(design, 0.001, 1e-2, k=1)
        near = TestCharacteristics(tpr=1 - 1e-9, tnr=0.9999)
        answer = mitm.mitm_query(table, TestOutcome("1"), near, cutoff=1e-2 * 1e-3)
        assert answer.evidence_mass > 0


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        design = DesignMatrix(["1100", "0110", "0011"])
        table = mitm.mitm_preprocess(design, 0.02, 1e-8)
        path = tmp_path / "table.bin"
        mitm.save_table(table, path)
        loaded = mitm.load_table(path, design)
        np.testing.assert_array_equal(loaded.codes, table.codes)
        np.testing.assert_allclose(loaded.mass, table.mass, atol=0)
        np.testing.assert_allclose(loaded.joint, table.joint, atol=0)
        assert loaded.k == table.k
        assert loaded.epsilon == table.epsilon

    def test_stale_cache_detected(self, tmp_path):
        design = DesignMatrix(["1100", "0110", "0011"])
        other = DesignMatrix(["1100", "0110", "1011"])
        table = mitm.mitm_preprocess(design, 0.02, 1e-8)
        path = tmp_path / "table.bin"
        mitm.save_table(table, path)
        with pytest.raises(StaleCacheError):
            mitm.load_table(path, other)
