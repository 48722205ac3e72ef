"""Domain types for pooled-test design and decoding.

Conventions used throughout the package:

* A *secret* is the unknown length-n binary infection vector (bit i = 1
  means patient i is infected).
* A *pool design* is a length-n binary vector selecting the patients whose
  samples are mixed into one lab test.
* Bit vectors are encoded as integers with patient 0 (or test 0) in the
  most significant position, so lexicographic order of the bit string and
  numeric order of the index coincide.  ``Secret.from_index(2, n=2)`` is
  the bit string ``10``.
* Dense distributions over secrets are numpy arrays of length 2**n indexed
  by that encoding.  Dense work is capped at n <= 20 and m <= 20.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DENSE_MAX_N = 20
DENSE_MAX_M = 20
NORMALIZATION_TOL = 1e-9


class GroupTestError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GroupTestError):
    """An input value violates a documented domain constraint."""


class DimensionError(GroupTestError):
    """Two values that must agree in length do not."""


class CapacityError(GroupTestError):
    """A request exceeds the dense-representation or enumeration guards."""


class SaturationError(GroupTestError):
    """No feasible mutation exists under the pooling constraints."""


class ProtocolError(GroupTestError):
    """An adaptive session was driven out of order."""


class ExhaustedError(ProtocolError):
    """A result was recorded on a session with no tests remaining."""


class InfeasibleError(GroupTestError):
    """The requested construction admits no valid instance."""


class StaleCacheError(GroupTestError):
    """A persisted decoder table does not match the supplied design."""


class NoPlausibleExplanationError(GroupTestError):
    """The certified decoder found zero evidence mass for an outcome.

    Carries enough context for the caller to raise epsilon or fall back
    to belief propagation.
    """

    def __init__(self, message: str, *, epsilon: float, outcome: "TestOutcome",
                 stored_codes: int, plausible_corruptions: int):
        super().__init__(message)
        self.epsilon = epsilon
        self.outcome = outcome
        self.stored_codes = stored_codes
        self.plausible_corruptions = plausible_corruptions


class ConfigError(GroupTestError):
    """An experiment configuration is internally inconsistent."""


def _check_bits(bits: Sequence[int], what: str) -> tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValidationError(f"{what} must contain only 0/1 bits, got {bits!r}")
    return out


def bits_to_index(bits: Sequence[int]) -> int:
    """Pack a bit sequence into an int, first element most significant."""
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    return index


def index_to_bits(index: int, n: int) -> tuple[int, ...]:
    """Inverse of :func:`bits_to_index` for a length-n vector."""
    return tuple((index >> (n - 1 - i)) & 1 for i in range(n))


@dataclass(frozen=True)
class Prior:
    """Independent per-patient infection probabilities."""

    probs: tuple[float, ...]

    def __init__(self, probs: Iterable[float]):
        probs = tuple(float(p) for p in probs)
        if len(probs) < 1:
            raise ValidationError("a prior needs at least one patient")
        for p in probs:
            if not (0.0 <= p <= 1.0) or not np.isfinite(p):
                raise ValidationError(f"prior probability {p} outside [0, 1]")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n: int, p: float) -> "Prior":
        return cls([p] * n)

    @property
    def n(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)

    def distribution(self) -> "SecretDistribution":
        """Expand to the dense distribution over all 2**n secrets."""
        n = self.n
        if n > DENSE_MAX_N:
            raise CapacityError(
                f"dense distribution needs 2**{n} entries; capped at n <= {DENSE_MAX_N}")
        dense = np.ones(1, dtype=np.float64)
        for p in self.probs:
            dense = np.kron(dense, np.array([1.0 - p, p]))
        return SecretDistribution(n, dense, _skip_checks=True)


@dataclass(frozen=True)
class TestCharacteristics:
    """True-positive and true-negative rate of one lab test.

    Both rates must exceed 0.5: an uninformative or anti-informative test
    is rejected outright (several decoders rely on tpr + tnr > 1).
    """

    tpr: float
    tnr: float

    def __post_init__(self):
        for name, v in (("tpr", self.tpr), ("tnr", self.tnr)):
            if not (0.5 < v <= 1.0):
                raise ValidationError(f"{name} must lie in (0.5, 1], got {v}")

    @classmethod
    def default(cls) -> "TestCharacteristics":
        return cls(tpr=0.99, tnr=0.90)


class _BitVector:
    """Shared behaviour of Secret / PoolDesign / TestOutcome."""

    __slots__ = ("bits",)

    def __init__(self, bits: Sequence[int] | str):
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        object.__setattr__(self, "bits", _check_bits(bits, type(self).__name__))

    def __setattr__(self, *a):  # immutable
        raise AttributeError(f"{type(self).__name__} is immutable")

    @classmethod
    def from_index(cls, index: int, n: int):
        return cls(index_to_bits(index, n))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return bits_to_index(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __repr__(self) -> str:
        return f"{type(self).__name__}('{self}')"

    def __eq__(self, other) -> bool:
        return type(other) is type(self) and other.bits == self.bits

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.bits))

    def __len__(self) -> int:
        return len(self.bits)


class Secret(_BitVector):
    """Ground-truth infection vector; bit i = 1 means patient i infected."""

    def popcount(self) -> int:
        return sum(self.bits)


class PoolDesign(_BitVector):
    """One pooled test; bit i = 1 means patient i's sample is in the pool."""

    def pool_size(self) -> int:
        return sum(self.bits)

    def hits(self, secret: Secret) -> bool:
        """Whether the pool contains at least one infected sample."""
        if secret.n != self.n:
            raise DimensionError(
                f"design over {self.n} patients, secret over {secret.n}")
        return (self.index & secret.index) != 0


class TestOutcome(_BitVector):
    """Observed lab results for an ordered list of m tests."""


@dataclass(frozen=True)
class DesignMatrix:
    """An ordered list of m pool designs over n patients.

    Semantically a multiset: two matrices whose rows are permutations of
    each other have the same canonical form.
    """

    rows: tuple[PoolDesign, ...]

    def __init__(self, rows: Iterable[PoolDesign | str | Sequence[int]]):
        parsed = []
        for r in rows:
            parsed.append(r if isinstance(r, PoolDesign) else PoolDesign(r))
        rows = tuple(parsed)
        if rows:
            n = rows[0].n
            for r in rows:
                if r.n != n:
                    raise DimensionError("all rows of a design must have equal length")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_row_ints(cls, row_ints: Iterable[int], n: int) -> "DesignMatrix":
        return cls([PoolDesign.from_index(r, n) for r in row_ints])

    @property
    def m(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        if not self.rows:
            raise ValidationError("empty design matrix has no patient count")
        return self.rows[0].n

    def row_ints(self) -> tuple[int, ...]:
        return tuple(r.index for r in self.rows)

    def canonical(self) -> "DesignMatrix":
        """Rows sorted lexicographically; invariant under row permutation."""
        return DesignMatrix(sorted(self.rows, key=lambda r: r.index))

    @property
    def canonical_form(self) -> tuple[str, ...]:
        """The sorted row bitstrings; equal for equal multisets."""
        return tuple(str(r) for r in self.canonical().rows)

    def column_counts(self) -> np.ndarray:
        """How many pools each patient appears in."""
        counts = np.zeros(self.n, dtype=np.int64)
        for r in self.rows:
            counts += np.asarray(r.bits, dtype=np.int64)
        return counts

    def __iter__(self):
        return iter(self.rows)


_UNBOUNDED = None


@dataclass(frozen=True)
class PoolingConstraints:
    """Lab-protocol limits on a design.

    max_pool_size bounds the ones per row (samples mixed into one tube);
    max_splits_per_sample bounds the ones per column (times one swab can
    be reused).  ``None`` means unbounded.
    """

    max_pool_size: int | None = _UNBOUNDED
    max_splits_per_sample: int | None = _UNBOUNDED

    def __post_init__(self):
        for name, v in (("max_pool_size", self.max_pool_size),
                        ("max_splits_per_sample", self.max_splits_per_sample)):
            if v is not None and int(v) < 1:
                raise ValidationError(f"{name} must be >= 1 when bounded, got {v}")

    def allows(self, matrix: DesignMatrix) -> bool:
        if self.max_pool_size is not None:
            if any(r.pool_size() > self.max_pool_size for r in matrix.rows):
                return False
        if self.max_splits_per_sample is not None and matrix.rows:
            if int(matrix.column_counts().max()) > self.max_splits_per_sample:
                return False
        return True


class SecretDistribution:
    """A normalized dense probability distribution over all 2**n secrets."""

    __slots__ = ("n", "probs")

    def __init__(self, n: int, probs: np.ndarray, *, _skip_checks: bool = False):
        probs = np.asarray(probs, dtype=np.float64)
        if not _skip_checks:
            if n < 1 or n > DENSE_MAX_N:
                raise CapacityError(f"dense distributions support 1 <= n <= {DENSE_MAX_N}")
            if probs.shape != (1 << n,):
                raise DimensionError(
                    f"distribution over {n} patients needs 2**{n} entries, got {probs.shape}")
            if not np.all(np.isfinite(probs)) or np.any(probs < 0):
                raise ValidationError("distribution entries must be finite and >= 0")
            if abs(float(probs.sum()) - 1.0) > NORMALIZATION_TOL:
                raise ValidationError(
                    f"distribution sums to {probs.sum()!r}; must be 1 within {NORMALIZATION_TOL}")
        self.n = n
        self.probs = probs

    def marginals(self) -> np.ndarray:
        """Per-patient probabilities P[s_i = 1]."""
        out = np.empty(self.n)
        idx = np.arange(1 << self.n)
        for i in range(self.n):
            mask = ((idx >> (self.n - 1 - i)) & 1).astype(bool)
            out[i] = self.probs[mask].sum()
        return out

    def copy(self) -> "SecretDistribution":
        return SecretDistribution(self.n, self.probs.copy(), _skip_checks=True)


def as_distribution(prior: "Prior | SecretDistribution") -> SecretDistribution:
    return prior.distribution() if isinstance(prior, Prior) else prior


@dataclass(frozen=True)
class PosteriorSummary:
    """What a decoder reports about the secret after seeing outcomes.

    ``error_bound`` and ``evidence_mass`` are populated by the certified
    decoder only; ``converged`` by belief propagation only.
    """

    marginals: tuple[float, ...]
    ml_secret: Secret
    confidence: float
    error_bound: float | None = None
    evidence_mass: float | None = None
    converged: bool | None = None

    def __post_init__(self):
        for v in self.marginals:
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise ValidationError(f"marginal {v} outside [0, 1]")
        if not (-1e-12 <= self.confidence <= 1 + 1e-12):
            raise ValidationError(f"confidence {self.confidence} outside [0, 1]")
        if self.error_bound is not None and self.error_bound < 0:
            raise ValidationError("error bound must be nonnegative")
