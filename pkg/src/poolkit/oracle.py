"""Brute-force reference implementations.

These enumerate the full secret, design, or strategy space and exist as
ground truth for everything else in the package.  None of them scales;
the guards are intentional.
"""

from __future__ import annotations

import itertools
import math
from typing import Literal

import numpy as np

from . import model
from .types import (
    CapacityError,
    DesignMatrix,
    PoolingConstraints,
    PosteriorSummary,
    Prior,
    SecretDistribution,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
    as_distribution,
)

__all__ = [
    "exact_posterior",
    "score_multiset",
    "optimal_nonadaptive",
    "optimal_adaptive_value",
    "feasible_design_ints",
    "Objective",
]

Objective = Literal["neg-conditional-entropy", "expected-confidence"]

DEFAULT_CANDIDATE_CAP = 10_000_000


def exact_posterior(prior: Prior | SecretDistribution, designs: DesignMatrix,
                    outcome: TestOutcome, chars: TestCharacteristics) -> PosteriorSummary:
    """Exact posterior summary by full enumeration of all 2**n secrets."""
    post = model.posterior_update(prior, designs, outcome, chars)
    return model.summarize(post)


def score_multiset(prior: Prior | SecretDistribution, designs: DesignMatrix,
                   chars: TestCharacteristics, objective: Objective) -> float:
    """Score a design multiset; higher is better for both objectives."""
    if objective == "neg-conditional-entropy":
        return -model.conditional_entropy(prior, designs, chars)
    if objective == "expected-confidence":
        return model.expected_confidence(prior, designs, chars)
    raise ValidationError(f"unknown objective {objective!r}")


def feasible_design_ints(n: int, constraints: PoolingConstraints | None) -> list[int]:
    """All single-pool designs over n patients obeying the row budget."""
    if constraints is None or constraints.max_pool_size is None:
        return list(range(1 << n))
    idx = np.arange(1 << n, dtype=np.uint64)
    ok = np.bitwise_count(idx) <= constraints.max_pool_size
    return [int(d) for d in idx[ok]]


def _column_counts_ok(rows: tuple[int, ...], n: int,
                      constraints: PoolingConstraints | None) -> bool:
    if constraints is None or constraints.max_splits_per_sample is None:
        return True
    for i in range(n):
        bit = 1 << (n - 1 - i)
        if sum(1 for r in rows if r & bit) > constraints.max_splits_per_sample:
            return False
    return True


def optimal_nonadaptive(n: int, m: int, chars: TestCharacteristics, prior: Prior,
                        constraints: PoolingConstraints | None = None,
                        objective: Objective = "neg-conditional-entropy",
                        candidate_cap: int = DEFAULT_CANDIDATE_CAP) -> tuple[DesignMatrix, float]:
    """Globally optimal design multiset by exhaustive enumeration.

    Multisets are enumerated in canonical (sorted) order, so the returned
    optimum is deterministic: the first multiset attaining the best score.
    """
    designs = feasible_design_ints(n, constraints)
    n_candidates = math.comb(len(designs) + m - 1, m)
    if n_candidates > candidate_cap:
        raise CapacityError(
            f"{n_candidates} candidate multisets exceed the cap {candidate_cap}")
    dist = prior.distribution()
    best_rows: tuple[int, ...] | None = None
    best_score = -math.inf
    for rows in itertools.combinations_with_replacement(designs, m):
        if not _column_counts_ok(rows, n, constraints):
            continue
        score = score_multiset(dist, DesignMatrix.from_row_ints(rows, n), chars, objective)
        if score > best_score:
            best_score = score
            best_rows = rows
    if best_rows is None:
        raise ValidationError("no feasible design multiset under the constraints")
    return DesignMatrix.from_row_ints(best_rows, n).canonical(), best_score


_ADAPTIVE_MAX_N = 5
_ADAPTIVE_MAX_M = 3
_FINGERPRINT_GRAIN = 1e-12


def _fingerprint(probs: np.ndarray) -> bytes:
    return np.round(probs / _FINGERPRINT_GRAIN).astype(np.int64).tobytes()


def optimal_adaptive_value(n: int, m: int, chars: TestCharacteristics,
                           prior: Prior | SecretDistribution) -> float:
    """Expected information gain of the best adaptive strategy, in bits.

    Full game-tree recursion over every design and outcome branch, with
    memoization on (posterior fingerprint, remaining tests).  Tiny
    instances only.
    """
    dist = as_distribution(prior)
    if dist.n > _ADAPTIVE_MAX_N or m > _ADAPTIVE_MAX_M:
        raise CapacityError(
            f"adaptive game tree capped at n <= {_ADAPTIVE_MAX_N}, m <= {_ADAPTIVE_MAX_M}")
    if m == 0:
        return 0.0
    all_designs = [DesignMatrix.from_row_ints([d], dist.n) for d in range(1 << dist.n)]
    memo: dict[tuple[bytes, int], float] = {}

    def value(d: SecretDistribution, remaining: int) -> float:
        if remaining == 0:
            return 0.0
        key = (_fingerprint(d.probs), remaining)
        if key in memo:
            return memo[key]
        h_now = model.entropy(d)
        best = 0.0
        for single in all_designs:
            expected = 0.0
            gain_now = h_now
            for t in (0, 1):
                weights = d.probs * model._row_likelihoods(
                    d.n, single.rows[0].index, t, chars)
                p_t = float(weights.sum())
                if p_t <= 0.0:
                    continue
                post = SecretDistribution(d.n, weights / p_t, _skip_checks=True)
                gain_now -= p_t * model.entropy(post)
                expected += p_t * value(post, remaining - 1)
            best = max(best, gain_now + expected)
        memo[key] = best
        return best

    return value(dist, m)
