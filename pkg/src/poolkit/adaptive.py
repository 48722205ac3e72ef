"""Greedy-adaptive test selection and the session state machine.

One adaptive step scans every candidate pool (all 2**n subsets, filtered
by the pool-size budget) and picks the one whose outcome carries the most
information about the secret under the current posterior.  Sessions wrap
the loop: recommend, observe, Bayes-update, repeat.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import model
from .evolve import ESConfig, es_optimize
from .rng import make_stream
from .types import (
    CapacityError,
    DesignMatrix,
    ExhaustedError,
    PoolDesign,
    PoolingConstraints,
    Prior,
    ProtocolError,
    SecretDistribution,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
    as_distribution,
)

__all__ = [
    "GREEDY_MAX_N",
    "greedy_next_design",
    "AdaptiveSession",
    "start_session",
    "record_result",
    "k_greedy_batch",
    "submodularity_sweep",
    "SubmodularityReport",
    "greedy_expected_information",
]

GREEDY_MAX_N = 16


def _subset_mass(probs: np.ndarray, n: int) -> np.ndarray:
    """subset_mass[mask] = total probability of secrets contained in mask."""
    f = probs.reshape((2,) * n).copy()
    for axis in range(n):
        f = f.cumsum(axis=axis)
    return f.reshape(-1)


def hit_probabilities(posterior: SecretDistribution) -> np.ndarray:
    """P[pool is hit] for every one of the 2**n candidate pools."""
    n = posterior.n
    full = (1 << n) - 1
    subset = _subset_mass(posterior.probs, n)
    # The pool d misses the secret iff the secret fits inside ~d.
    return 1.0 - subset[full ^ np.arange(1 << n)]


def greedy_next_design(posterior: Prior | SecretDistribution,
                       chars: TestCharacteristics,
                       constraints: PoolingConstraints | None = None,
                       blocked_patients: int = 0) -> PoolDesign:
    """The single pool whose result is expected to be most informative.

    Ties break toward the smallest pool, then the lexicographically
    smallest design.  ``blocked_patients`` is a bitmask of patients whose
    split budget is exhausted; pools touching them are skipped.  The
    per-pool information depends on the posterior only through the
    probability that the pool is hit, so the scan is a subset-sum
    transform plus a vectorized concave score.
    """
    posterior = as_distribution(posterior)
    n = posterior.n
    if n > GREEDY_MAX_N:
        raise CapacityError(f"greedy scan over 2**n designs capped at n <= {GREEDY_MAX_N}")
    info = model.single_test_information(hit_probabilities(posterior), chars)
    candidates = np.arange(1 << n, dtype=np.uint64)
    pool_sizes = np.bitwise_count(candidates)
    feasible = np.ones(1 << n, dtype=bool)
    if constraints is not None and constraints.max_pool_size is not None:
        feasible &= pool_sizes <= constraints.max_pool_size
    if blocked_patients:
        feasible &= (candidates & np.uint64(blocked_patients)) == 0
    info = np.where(feasible, info, -np.inf)
    best = info.max()
    if best == -np.inf:
        raise ValidationError("no feasible pool design under the constraints")
    ties = np.flatnonzero(info == best)
    winner = ties[np.lexsort((ties, pool_sizes[ties]))][0]
    return PoolDesign.from_index(int(winner), n)


@dataclass(frozen=True)
class AdaptiveSession:
    """State of one operator-driven adaptive testing loop.

    history length plus remaining_tests always equals the initial test
    budget, and the posterior is the prior Bayes-updated on exactly the
    recorded history.
    """

    session_id: str
    posterior: SecretDistribution
    chars: TestCharacteristics
    remaining_tests: int
    history: tuple[tuple[PoolDesign, int], ...]
    constraints: PoolingConstraints
    recommended: PoolDesign | None
    initial_tests: int

    @property
    def n(self) -> int:
        return self.posterior.n

    def splits_used(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=np.int64)
        for design, _ in self.history:
            counts += np.asarray(design.bits, dtype=np.int64)
        return counts

    def blocked_patients(self) -> int:
        limit = self.constraints.max_splits_per_sample
        if limit is None:
            return 0
        mask = 0
        for i, used in enumerate(self.splits_used()):
            if used >= limit:
                mask |= 1 << (self.n - 1 - i)
        return mask


def _recommend(posterior: SecretDistribution, chars: TestCharacteristics,
               constraints: PoolingConstraints, blocked: int) -> PoolDesign:
    return greedy_next_design(posterior, chars, constraints, blocked)


def start_session(session_id: str, prior: Prior | SecretDistribution,
                  chars: TestCharacteristics, tests: int,
                  constraints: PoolingConstraints | None = None) -> AdaptiveSession:
    """Open a session with a test budget and compute the first recommendation."""
    posterior = as_distribution(prior)
    if posterior.n > GREEDY_MAX_N:
        raise CapacityError(f"adaptive sessions capped at n <= {GREEDY_MAX_N}")
    if tests < 0:
        raise ValidationError("test budget must be >= 0")
    constraints = constraints or PoolingConstraints()
    recommended = _recommend(posterior, chars, constraints, 0) if tests > 0 else None
    return AdaptiveSession(
        session_id=session_id,
        posterior=posterior,
        chars=chars,
        remaining_tests=tests,
        history=(),
        constraints=constraints,
        recommended=recommended,
        initial_tests=tests,
    )


def record_result(session: AdaptiveSession, observed: int) -> AdaptiveSession:
    """Fold one observed lab result into the session.

    Updates the posterior on the pending recommendation, decrements the
    budget, and computes the next recommendation if tests remain.
    """
    if observed not in (0, 1):
        raise ValidationError(f"observed result must be 0 or 1, got {observed}")
    if session.remaining_tests <= 0:
        raise ExhaustedError(f"session {session.session_id} has no tests remaining")
    if session.recommended is None:
        raise ProtocolError(f"session {session.session_id} has no pending recommendation")
    design = session.recommended
    posterior = model.posterior_update(
        session.posterior, DesignMatrix([design]), TestOutcome([observed]), session.chars)
    history = session.history + ((design, observed),)
    remaining = session.remaining_tests - 1
    updated = AdaptiveSession(
        session_id=session.session_id,
        posterior=posterior,
        chars=session.chars,
        remaining_tests=remaining,
        history=history,
        constraints=session.constraints,
        recommended=None,
        initial_tests=session.initial_tests,
    )
    if remaining > 0:
        recommended = _recommend(posterior, session.chars, session.constraints,
                                 updated.blocked_patients())
        updated = AdaptiveSession(
            session_id=updated.session_id,
            posterior=updated.posterior,
            chars=updated.chars,
            remaining_tests=updated.remaining_tests,
            history=updated.history,
            constraints=updated.constraints,
            recommended=recommended,
            initial_tests=updated.initial_tests,
        )
    return updated


DEFAULT_BATCH_ORACLE_CAP = 100_000


def k_greedy_batch(posterior: Prior | SecretDistribution, chars: TestCharacteristics,
                   batch_size: int, constraints: PoolingConstraints | None = None,
                   search: ESConfig | None = None,
                   oracle_cap: int = DEFAULT_BATCH_ORACLE_CAP) -> DesignMatrix:
    """A batch of pools maximizing the joint information of their results.

    Exhaustive over design multisets when the space is small enough,
    otherwise delegated to the evolutionary search with the joint
    information as the fitness.
    """
    posterior = as_distribution(posterior)
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    n = posterior.n
    if batch_size == 1:
        return DesignMatrix([greedy_next_design(posterior, chars, constraints)])

    from .oracle import feasible_design_ints, _column_counts_ok

    designs = feasible_design_ints(n, constraints)
    if math.comb(len(designs) + batch_size - 1, batch_size) <= oracle_cap:
        best_rows = None
        best_score = -np.inf
        for rows in itertools.combinations_with_replacement(designs, batch_size):
            if not _column_counts_ok(rows, n, constraints):
                continue
            score = model.mutual_information(
                posterior, DesignMatrix.from_row_ints(rows, n), chars)
            if score > best_score:
                best_score = score
                best_rows = rows
        return DesignMatrix.from_row_ints(best_rows, n).canonical()

    config = search or ESConfig(budget=20_000)
    if constraints is not None:
        config = ESConfig(budget=config.budget, seed=config.seed, lam=config.lam,
                          luby_base=config.luby_base, objective=config.objective,
                          constraints=constraints)

    def scorer(rows: tuple[int, ...]) -> float:
        return model.mutual_information(
            posterior, DesignMatrix.from_row_ints(rows, n), chars)

    result = es_optimize(n, batch_size, chars, None, config, scorer=scorer)
    return result.design.canonical()


@dataclass(frozen=True)
class SubmodularityReport:
    trials: int
    violations: int
    worst_delta: float
    tolerance: float


_SUBMODULARITY_TOL = -1e-6


def submodularity_sweep(trials: int, n: int = 5, seed: int = 0,
                        batch: int = 20_000) -> SubmodularityReport:
    """Empirical check that a second test has diminishing expected returns.

    Each trial draws a random dense prior over 2**n secrets, random test
    characteristics in (0.5, 1], and a random pair of pools, then checks

        delta = H(S|T1,T2) - H(S|T1) - H(S|T2) + H(S) >= -1e-6.

    A negative delta beyond tolerance would contradict the diminishing-
    returns assumption behind the greedy guarantee; the report counts
    violations and tracks the worst delta seen.
    """
    size = 1 << n
    idx = np.arange(size, dtype=np.int64)
    rng = make_stream(seed, 0)
    violations = 0
    worst = np.inf
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        prior = rng.uniform(size=(b, size))
        prior /= prior.sum(axis=1, keepdims=True)
        p_pos_clean = rng.uniform(size=b) / 2.0        # P[t=1 | pool clean]
        p_pos_hit = 1.0 - rng.uniform(size=b) / 2.0    # P[t=1 | pool hit]
        d1 = rng.integers(0, size, size=b)
        d2 = rng.integers(0, size, size=b)

        hits1 = (idx[None, :] & d1[:, None]) != 0
        hits2 = (idx[None, :] & d2[:, None]) != 0
        rate1 = np.where(hits1, p_pos_hit[:, None], p_pos_clean[:, None])
        rate2 = np.where(hits2, p_pos_hit[:, None], p_pos_clean[:, None])

        h_s = -model._xlog2x(prior).sum(axis=1)
        hb1 = model.binary_entropy(rate1)
        hb2 = model.binary_entropy(rate2)

        def h_t(joint_rates: list[np.ndarray]) -> np.ndarray:
            # Entropy of the outcome tuple; one factor per test.
            total = np.zeros(b)
            for bits in itertools.product((0, 1), repeat=len(joint_rates)):
                probs = prior.copy()
                for bit, rates in zip(bits, joint_rates):
                    probs = probs * (rates if bit else 1.0 - rates)
                total -= model._xlog2x(probs.sum(axis=1))
            return total

        h_cond_1 = h_s + (prior * hb1).sum(axis=1) - h_t([rate1])
        h_cond_2 = h_s + (prior * hb2).sum(axis=1) - h_t([rate2])
        h_cond_12 = h_s + (prior * (hb1 + hb2)).sum(axis=1) - h_t([rate1, rate2])

        delta = h_cond_12 - h_cond_1 - h_cond_2 + h_s
        violations += int((delta < _SUBMODULARITY_TOL).sum())
        worst = min(worst, float(delta.min()))
        done += b
    return SubmodularityReport(trials=trials, violations=violations,
                               worst_delta=worst, tolerance=_SUBMODULARITY_TOL)


def greedy_expected_information(prior: Prior | SecretDistribution,
                                chars: TestCharacteristics, tests: int,
                                constraints: PoolingConstraints | None = None) -> float:
    """Expected total information of the greedy policy, in bits.

    Exact recursion over every outcome branch: at each node the greedy
    pool is selected, then both results are expanded with their predictive
    probabilities.
    """
    dist = as_distribution(prior)

    def recurse(d: SecretDistribution, remaining: int) -> float:
        if remaining == 0:
            return 0.0
        design = greedy_next_design(d, chars, constraints)
        total = model.entropy(d)
        for t in (0, 1):
            weights = d.probs * model._row_likelihoods(d.n, design.index, t, chars)
            p_t = float(weights.sum())
            if p_t <= 0.0:
                continue
            post = SecretDistribution(d.n, weights / p_t, _skip_checks=True)
            total -= p_t * model.entropy(post)
            total += p_t * recurse(post, remaining - 1)
        return total

    return recurse(dist, tests)
