"""Test model, Bayesian updating, and information-theoretic scores.

Everything here is a pure function over immutable values.  Dense
computations follow the package bit conventions (see ``types``): a
distribution over secrets is an array indexed by the secret's integer
encoding, and an outcome over m tests is encoded the same way.
"""

from __future__ import annotations

import numpy as np

from .types import (
    DENSE_MAX_M,
    CapacityError,
    DesignMatrix,
    DimensionError,
    PoolDesign,
    PosteriorSummary,
    Prior,
    Secret,
    SecretDistribution,
    TestCharacteristics,
    TestOutcome,
    as_distribution,
)

__all__ = [
    "binary_entropy",
    "outcome_likelihood",
    "posterior_update",
    "entropy",
    "conditional_entropy",
    "mutual_information",
    "expected_confidence",
    "ml_decode",
    "single_test_information",
]


def _xlog2x(p: np.ndarray | float) -> np.ndarray | float:
    """p * log2(p) with the 0 log 0 := 0 convention."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    nz = p > 0
    out[nz] = p[nz] * np.log2(p[nz])
    return out


def binary_entropy(p) -> np.ndarray | float:
    """Entropy in bits of a Bernoulli(p) variable, elementwise."""
    p = np.asarray(p, dtype=np.float64)
    h = -(_xlog2x(p) + _xlog2x(1.0 - p))
    return float(h) if h.ndim == 0 else h


def outcome_likelihood(design: PoolDesign, secret: Secret, observed: int,
                       chars: TestCharacteristics) -> float:
    """Probability of one lab result given the pool and the true secret.

    A pool containing at least one infected sample reads positive with
    probability tpr; a clean pool reads negative with probability tnr.
    """
    if design.n != secret.n:
        raise DimensionError(
            f"design length {design.n} != secret length {secret.n}")
    if observed not in (0, 1):
        raise DimensionError(f"observed bit must be 0 or 1, got {observed}")
    hit = (design.index & secret.index) != 0
    if hit:
        return chars.tpr if observed == 1 else 1.0 - chars.tpr
    return 1.0 - chars.tnr if observed == 1 else chars.tnr


def _row_likelihoods(n: int, row_int: int, observed: int,
                     chars: TestCharacteristics) -> np.ndarray:
    """Likelihood of one observed bit for every secret, vectorized."""
    idx = np.arange(1 << n, dtype=np.int64)
    hit = (idx & row_int) != 0
    if observed == 1:
        return np.where(hit, chars.tpr, 1.0 - chars.tnr)
    return np.where(hit, 1.0 - chars.tpr, chars.tnr)


def posterior_update(prior: Prior | SecretDistribution, designs: DesignMatrix,
                     outcome: TestOutcome, chars: TestCharacteristics) -> SecretDistribution:
    """Bayes-update a dense distribution on the observed outcomes.

    The update is commutative and compositional: applying tests one at a
    time, in any order, equals applying them jointly.
    """
    dist = as_distribution(prior)
    if outcome.n != designs.m:
        raise DimensionError(
            f"outcome has {outcome.n} bits for a design with {designs.m} rows")
    if designs.m > 0 and designs.n != dist.n:
        raise DimensionError(
            f"design over {designs.n} patients, distribution over {dist.n}")
    weights = dist.probs.copy()
    for row, t in zip(designs.rows, outcome.bits):
        weights *= _row_likelihoods(dist.n, row.index, t, chars)
    total = float(weights.sum())
    if total <= 0.0:
        # Unreachable for chars in (0.5, 1): every outcome has positive mass.
        raise AssertionError("evidence mass vanished; test model violated")
    return SecretDistribution(dist.n, weights / total, _skip_checks=True)


def entropy(dist: Prior | SecretDistribution) -> float:
    """Shannon entropy of the secret in bits."""
    dist = as_distribution(dist)
    return float(-_xlog2x(dist.probs).sum())


def _check_dense_m(m: int) -> None:
    if m > DENSE_MAX_M:
        raise CapacityError(f"dense outcome enumeration capped at m <= {DENSE_MAX_M}")


def _pattern_classes(dist: SecretDistribution, designs: DesignMatrix):
    """Group secrets by their noiseless result pattern.

    The lab result distribution depends on a secret only through which
    pools it hits, so secrets fall into at most 2**m classes.  Returns
    (patterns, weight per class, max prior mass per class, expected
    number of hit pools).
    """
    n, m = dist.n, designs.m
    idx = np.arange(1 << n, dtype=np.int64)
    y = np.zeros(1 << n, dtype=np.int64)
    for r, row in enumerate(designs.rows):
        y |= (((idx & row.index) != 0).astype(np.int64)) << (m - 1 - r)
    patterns, inverse = np.unique(y, return_inverse=True)
    weight = np.bincount(inverse, weights=dist.probs, minlength=len(patterns))
    best = np.zeros(len(patterns))
    np.maximum.at(best, inverse, dist.probs)
    mean_hits = float((dist.probs * np.bitwise_count(y.astype(np.uint64))).sum())
    return patterns, weight, best, mean_hits


def _pattern_outcome_products(patterns: np.ndarray, outcomes: np.ndarray, m: int,
                              chars: TestCharacteristics) -> np.ndarray:
    """P[T = t | pattern y] for each (outcome, pattern) pair."""
    # table[y_bit, t_bit]
    table = np.array([[chars.tnr, 1.0 - chars.tnr],
                      [1.0 - chars.tpr, chars.tpr]])
    out = np.ones((len(outcomes), len(patterns)))
    for r in range(m):
        shift = m - 1 - r
        y_bit = (patterns >> shift) & 1
        t_bit = (outcomes >> shift) & 1
        out *= table[y_bit[None, :], t_bit[:, None]]
    return out


_OUTCOME_CHUNK = 4096


def conditional_entropy(prior: Prior | SecretDistribution, designs: DesignMatrix,
                        chars: TestCharacteristics) -> float:
    """Expected residual uncertainty H(S|T) about the secret, in bits.

    Decomposes as H(S) + H(T|S) - H(T).  Given the secret, the m results
    are independent coin flips whose bias depends only on whether each
    pool is hit, so H(T|S) reduces to binary entropies weighted by the
    expected hit count; H(T) is enumerated over outcome patterns.
    """
    dist = as_distribution(prior)
    m = designs.m
    if m == 0:
        return entropy(dist)
    if designs.n != dist.n:
        raise DimensionError("design and distribution disagree on patient count")
    _check_dense_m(m)
    patterns, weight, _, mean_hits = _pattern_classes(dist, designs)
    h_t_given_s = mean_hits * binary_entropy(chars.tpr) \
        + (m - mean_hits) * binary_entropy(chars.tnr)
    h_t = 0.0
    for start in range(0, 1 << m, _OUTCOME_CHUNK):
        outcomes = np.arange(start, min(start + _OUTCOME_CHUNK, 1 << m), dtype=np.int64)
        probs_t = _pattern_outcome_products(patterns, outcomes, m, chars) @ weight
        h_t -= float(_xlog2x(probs_t).sum())
    return entropy(dist) + h_t_given_s - h_t


def mutual_information(prior: Prior | SecretDistribution, designs: DesignMatrix,
                       chars: TestCharacteristics) -> float:
    """Expected information the tests reveal about the secret, in bits."""
    dist = as_distribution(prior)
    if designs.m == 0:
        return 0.0
    return entropy(dist) - conditional_entropy(dist, designs, chars)


def expected_confidence(prior: Prior | SecretDistribution, designs: DesignMatrix,
                        chars: TestCharacteristics) -> float:
    """Probability that the maximum-likelihood diagnosis is correct.

    Equals the expectation over outcomes of the largest posterior mass.
    """
    dist = as_distribution(prior)
    m = designs.m
    if m == 0:
        return float(dist.probs.max())
    if designs.n != dist.n:
        raise DimensionError("design and distribution disagree on patient count")
    _check_dense_m(m)
    patterns, weight, best, _ = _pattern_classes(dist, designs)
    total = 0.0
    for start in range(0, 1 << m, _OUTCOME_CHUNK):
        outcomes = np.arange(start, min(start + _OUTCOME_CHUNK, 1 << m), dtype=np.int64)
        products = _pattern_outcome_products(patterns, outcomes, m, chars)
        total += float((products * best).max(axis=1).sum())
    return total


def ml_decode(dist: Prior | SecretDistribution) -> tuple[Secret, float]:
    """Most probable secret and its posterior mass.

    Ties are broken toward the lexicographically smallest secret, which
    under the package bit encoding is the smallest index.
    """
    dist = as_distribution(dist)
    index = int(np.argmax(dist.probs))
    return Secret.from_index(index, dist.n), float(dist.probs[index])


def summarize(dist: SecretDistribution) -> PosteriorSummary:
    """Exact posterior summary of a dense distribution."""
    secret, confidence = ml_decode(dist)
    return PosteriorSummary(
        marginals=tuple(float(x) for x in dist.marginals()),
        ml_secret=secret,
        confidence=confidence,
        error_bound=0.0,
    )


def single_test_information(rho, chars: TestCharacteristics):
    """Information in bits from one pooled test whose pool is hit w.p. rho.

    ``rho`` may be a scalar or an array.  The result is concave in rho
    for any valid characteristics and vanishes at rho = 0 and rho = 1.
    """
    rho = np.asarray(rho, dtype=np.float64)
    u = (chars.tpr + chars.tnr - 1.0) * rho + (1.0 - chars.tnr)
    info = binary_entropy(u) - rho * binary_entropy(chars.tpr) \
        - (1.0 - rho) * binary_entropy(chars.tnr)
    return float(info) if np.ndim(info) == 0 else info
