"""Load-balanced Bloom-array pool layouts.

The m tests are split into g groups of b pools.  Group j assigns patient
i to pool perm_j(i) mod b, where perm_j is a seeded permutation, so pool
sizes within a group differ by at most one and each patient appears in
exactly g pools.  g = 1 is classic single pooling, g = 2 double pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .rng import make_stream
from .types import (
    DesignMatrix,
    DimensionError,
    InfeasibleError,
    PoolDesign,
    Prior,
    TestCharacteristics,
    TestOutcome,
    ValidationError,
)

__all__ = [
    "BloomLayout",
    "DimensionPlan",
    "plan_dimensions",
    "build_layout",
    "orthogonal_pair_layout",
    "balanced_assignment_nonuniform",
    "optimal_pool_positive_prob",
    "perfect_decode",
    "pool_positive_probabilities",
]


@dataclass(frozen=True)
class BloomLayout:
    """g independent balanced partitions of n patients into b pools each.

    assignments[j, i] is the pool index of patient i in group j.  When the
    layout came from permutation hashing the permutations are retained for
    serialization; weight-balanced layouts carry assignments only.
    """

    n: int
    g: int
    b: int
    assignments: np.ndarray
    seed: int = 0
    permutations: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.assignments, dtype=np.int64)
        object.__setattr__(self, "assignments", a)
        if a.shape != (self.g, self.n):
            raise DimensionError(
                f"assignments shape {a.shape} != (g={self.g}, n={self.n})")
        if a.min() < 0 or a.max() >= self.b:
            raise ValidationError("pool assignments out of range")

    @property
    def m(self) -> int:
        return self.g * self.b

    def row_index(self, group: int, pool: int) -> int:
        return group * self.b + pool

    def patient_rows(self, patient: int) -> list[int]:
        """Indices of the materialized rows containing the patient."""
        return [self.row_index(j, int(self.assignments[j, patient]))
                for j in range(self.g)]

    def to_design_matrix(self) -> DesignMatrix:
        """Materialize as g*b pool designs, group-major."""
        rows = []
        for j in range(self.g):
            for pool in range(self.b):
                bits = (self.assignments[j] == pool).astype(int)
                rows.append(PoolDesign(bits.tolist()))
        return DesignMatrix(rows)


@dataclass(frozen=True)
class DimensionPlan:
    g: int
    b: int
    m_used: int
    unused_tests: int
    g_unclamped: float
    degenerate: bool


def plan_dimensions(n: int, m: int, prevalence: float) -> DimensionPlan:
    """Group/pool counts minimizing the false-suspect bound for perfect tests.

    The bound (1 - exp(-rho*n/b))**g is minimized at g = (m/(n*rho))*ln 2;
    we round to the nearest integer (ties toward fewer groups, i.e. fewer
    splits per patient) and clamp into [1, m].  Tests beyond g*b are
    reported unused rather than silently absorbed.
    """
    if n < 1 or m < 1:
        raise ValidationError("need n >= 1 and m >= 1")
    if not (0.0 < prevalence < 1.0):
        raise ValidationError(f"prevalence must lie in (0, 1), got {prevalence}")
    g_real = (m / (n * prevalence)) * math.log(2.0)
    g = int(math.ceil(g_real - 0.5))  # round half down
    degenerate = g < 1 or g > m
    g = min(max(g, 1), m)
    b = m // g
    if b < 1:
        raise InfeasibleError(f"too few tests: m={m} cannot host g={g} groups")
    return DimensionPlan(g=g, b=b, m_used=g * b, unused_tests=m - g * b,
                         g_unclamped=g_real, degenerate=degenerate)


def build_layout(n: int, g: int, b: int, seed: int = 0) -> BloomLayout:
    """Permutation-hashed layout; deterministic given the seed.

    Group j draws its permutation from the stream (seed, j), so groups
    are independent and any subset can be rebuilt without the others.
    """
    if n < 1 or g < 1 or b < 1:
        raise ValidationError("need n, g, b >= 1")
    permutations = np.empty((g, n), dtype=np.int64)
    for j in range(g):
        permutations[j] = make_stream(seed, j).permutation(n)
    assignments = permutations % b
    return BloomLayout(n=n, g=g, b=b, assignments=assignments, seed=seed,
                       permutations=permutations)


def orthogonal_pair_layout(n: int, b: int) -> BloomLayout:
    """Two groups with no patient pair sharing more than one pool.

    Group 0 takes contiguous blocks, group 1 strides modulo b (for a
    square n = b*b this is exactly the rows and columns of a grid).  With
    overlap-free groups a negative patient's pools probe disjoint patient
    sets, so its per-group collision events really are independent, which
    is the regime where the dimensioning bound for the perfect decoder is
    exact.  Random permutation pairs do NOT have this property once pools
    reach size ~sqrt(n): doubly-shared patients then dominate the
    false-suspect rate.
    """
    if n < 1 or b < 1:
        raise ValidationError("need n, b >= 1")
    if n > b * b:
        raise InfeasibleError(
            f"an overlap-free pair needs n <= b*b, got n={n}, b={b}")
    idx = np.arange(n)
    # Balanced contiguous blocks (sizes floor/ceil of n/b, each <= b for
    # n <= b*b, so two patients can never share both a block and a stride).
    assignments = np.stack([(idx * b) // n, idx % b])
    return BloomLayout(n=n, g=2, b=b, assignments=assignments, seed=0,
                       permutations=None)


def balanced_assignment_nonuniform(prior: Prior, g: int, b: int,
                                   target_rho: float | None = None) -> BloomLayout:
    """Weight-balanced layout for unequal priors.

    Patients carry weight w_i = -log(1 - p_i), so a pool's accumulated
    weight determines its probability of testing positive.  Patients are
    placed largest-first into the pool furthest below its equal share of
    the total weight (ties: lowest patient then lowest pool index), which
    keeps the spread of pool-positive probabilities below the largest
    single weight.  The assignment is deterministic, hence identical
    across groups.
    """
    if g < 1 or b < 1:
        raise ValidationError("need g, b >= 1")
    p = prior.as_array()
    if np.any(p >= 1.0):
        raise ValidationError("a certain-positive prior (p=1) cannot be weight-balanced")
    weights = -np.log1p(-p)
    order = sorted(range(prior.n), key=lambda i: (-weights[i], i))
    assignment = np.zeros(prior.n, dtype=np.int64)
    load = np.zeros(b)
    for i in order:
        pool = int(np.argmin(load))
        assignment[i] = pool
        load[pool] += weights[i]
    assignments = np.tile(assignment, (g, 1))
    return BloomLayout(n=prior.n, g=g, b=b, assignments=assignments, seed=0,
                       permutations=None)


def pool_positive_probabilities(layout: BloomLayout, prior: Prior) -> np.ndarray:
    """P[pool hit] = 1 - prod(1 - p_i) per materialized row."""
    if prior.n != layout.n:
        raise DimensionError("prior and layout disagree on patient count")
    p = prior.as_array()
    out = np.empty(layout.m)
    for j in range(layout.g):
        for pool in range(layout.b):
            members = layout.assignments[j] == pool
            out[layout.row_index(j, pool)] = 1.0 - np.prod(1.0 - p[members])
    return out


_BISECTION_TOL = 1e-12


def optimal_pool_positive_prob(chars: TestCharacteristics) -> float:
    """The pool-hit probability maximizing one test's information.

    The per-test information I(rho) is strictly concave with I(0) =
    I(1) = 0, so its derivative has a unique interior root; bisection
    refines it to 1e-12.  For tpr = tnr the optimum is exactly 1/2.
    """
    if chars.tpr == chars.tnr:
        return 0.5
    slope = chars.tpr + chars.tnr - 1.0
    gap = model.binary_entropy(chars.tpr) - model.binary_entropy(chars.tnr)

    def derivative(rho: float) -> float:
        u = slope * rho + (1.0 - chars.tnr)
        if u <= 0.0:
            return math.inf
        if u >= 1.0:
            return -math.inf
        return slope * math.log2((1.0 - u) / u) - gap

    lo, hi = 0.0, 1.0
    while hi - lo > _BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if derivative(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def perfect_decode(layout: BloomLayout, outcome: TestOutcome) -> np.ndarray:
    """Label each patient suspect iff every one of its pools read positive.

    Exact for noiseless tests: a positive patient always turns all its
    pools positive, so no false negatives are possible; false suspects
    come only from colliding with positives in every group.
    """
    if outcome.n != layout.m:
        raise DimensionError(
            f"outcome has {outcome.n} bits for a layout with {layout.m} pools")
    bits = np.asarray(outcome.bits, dtype=bool)
    suspect = np.ones(layout.n, dtype=bool)
    for j in range(layout.g):
        rows = j * layout.b + layout.assignments[j]
        suspect &= bits[rows]
    return suspect
