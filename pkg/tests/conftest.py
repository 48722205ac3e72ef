"""Shared test helpers: independent brute-force oracles.

These deliberately re-derive quantities by the most literal enumeration
possible (nested loops over secrets and outcomes) so the package's
vectorized implementations are checked against a second route.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from poolkit.types import DesignMatrix, Prior, TestCharacteristics


def dense_prior(prior: Prior) -> np.ndarray:
    """Dense distribution over secrets by literal per-secret products."""
    n = prior.n
    out = np.empty(1 << n)
    for s in range(1 << n):
        mass = 1.0
        for i in range(n):
            bit = (s >> (n - 1 - i)) & 1
            mass *= prior.probs[i] if bit else 1.0 - prior.probs[i]
        out[s] = mass
    return out


def row_hit(row_int: int, secret_int: int) -> bool:
    return (row_int & secret_int) != 0


def outcome_prob_given_secret(design: DesignMatrix, secret_int: int,
                              outcome_int: int, chars: TestCharacteristics) -> float:
    m = design.m
    prob = 1.0
    for r, row in enumerate(design.rows):
        t = (outcome_int >> (m - 1 - r)) & 1
        if row_hit(row.index, secret_int):
            prob *= chars.tpr if t else 1.0 - chars.tpr
        else:
            prob *= 1.0 - chars.tnr if t else chars.tnr
    return prob


def brute_conditional_entropy(probs: np.ndarray, design: DesignMatrix,
                              chars: TestCharacteristics) -> float:
    """H(S|T) by direct summation over every (secret, outcome) pair."""
    n_secrets = len(probs)
    m = design.m
    total = 0.0
    for t in range(1 << m):
        p_t = 0.0
        joint = np.empty(n_secrets)
        for s in range(n_secrets):
            joint[s] = probs[s] * outcome_prob_given_secret(design, s, t, chars)
            p_t += joint[s]
        for s in range(n_secrets):
            if joint[s] > 0.0:
                total -= joint[s] * math.log2(joint[s] / p_t)
    return total


def brute_expected_confidence(probs: np.ndarray, design: DesignMatrix,
                              chars: TestCharacteristics) -> float:
    """E_t[max_s P(s|t)] by direct enumeration."""
    m = design.m
    total = 0.0
    for t in range(1 << m):
        best = 0.0
        for s in range(len(probs)):
            best = max(best, probs[s] * outcome_prob_given_secret(design, s, t, chars))
        total += best
    return total


def brute_marginals(probs: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    for s in range(1 << n):
        for i in range(n):
            if (s >> (n - 1 - i)) & 1:
                out[i] += probs[s]
    return out


def all_multisets(n: int, m: int):
    return itertools.combinations_with_replacement(range(1 << n), m)


@pytest.fixture
def default_chars() -> TestCharacteristics:
    return TestCharacteristics(tpr=0.99, tnr=0.9)
