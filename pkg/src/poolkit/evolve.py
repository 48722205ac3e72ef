"""(1+lambda) evolutionary search over design multisets with Luby restarts.

The individual is a whole design matrix.  Offspring are built as an
iterated mutation chain (each offspring mutates the previous one, not the
parent), which lets a generation walk out of local optima.  Restart
lengths follow the Luby sequence, the optimal schedule for Las Vegas
algorithms, with a base proportional to the problem size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oracle import Objective, score_multiset
from .rng import make_stream
from .types import (
    DesignMatrix,
    InfeasibleError,
    PoolingConstraints,
    Prior,
    SaturationError,
    SecretDistribution,
    TestCharacteristics,
    ValidationError,
)

__all__ = ["ESConfig", "ESResult", "luby", "mutate", "es_optimize"]

_MUTATE_RETRY_FACTOR = 32


def luby(index: int, base: int = 1) -> int:
    """The index-th term (1-based) of the Luby restart sequence, scaled.

    With base 1 the sequence runs 1, 1, 2, 1, 1, 2, 4, 1, 1, 2, ...
    """
    if index < 1:
        raise ValidationError(f"luby index must be >= 1, got {index}")
    if base < 1:
        raise ValidationError(f"luby base must be >= 1, got {base}")
    while True:
        k = index.bit_length()
        if index == (1 << k) - 1:
            return (1 << (k - 1)) * base
        index -= (1 << (k - 1)) - 1


@dataclass(frozen=True)
class ESConfig:
    """Search knobs.

    lam is the offspring chain length per generation; budget caps the
    total number of fitness lookups.  Defaults follow usage in practice:
    a small constant lam and a Luby base proportional to n*m.
    """

    budget: int
    seed: int = 0
    lam: int | None = None
    luby_base: int | None = None
    objective: Objective = "neg-conditional-entropy"
    constraints: PoolingConstraints = field(default_factory=PoolingConstraints)

    def __post_init__(self):
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if self.lam is not None and self.lam < 1:
            raise ValidationError("lambda must be >= 1")
        if self.luby_base is not None and self.luby_base < 1:
            raise ValidationError("luby_base must be >= 1")


@dataclass
class ESResult:
    design: DesignMatrix
    score: float
    trace: np.ndarray
    evaluations: int
    restarts: int


def _column_count(rows: np.ndarray, bit: int) -> int:
    return int(np.count_nonzero(rows & bit))


def mutate(parent_rows: np.ndarray, n: int, constraints: PoolingConstraints,
           rng: np.random.Generator) -> np.ndarray:
    """Flip one uniformly chosen bit, resampling until the flip is feasible.

    Turning a bit off is always feasible; turning one on must respect the
    row (pool size) and column (splits per sample) budgets.
    """
    m = len(parent_rows)
    max_pool = constraints.max_pool_size
    max_splits = constraints.max_splits_per_sample
    for _ in range(_MUTATE_RETRY_FACTOR * n * m):
        r = int(rng.integers(m))
        i = int(rng.integers(n))
        bit = 1 << (n - 1 - i)
        row = int(parent_rows[r])
        if row & bit:
            child = parent_rows.copy()
            child[r] = row ^ bit
            return child
        if max_pool is not None and row.bit_count() + 1 > max_pool:
            continue
        if max_splits is not None and _column_count(parent_rows, bit) + 1 > max_splits:
            continue
        child = parent_rows.copy()
        child[r] = row | bit
        return child
    raise SaturationError(
        "no feasible single-bit flip found; constraints saturate the design")


def es_optimize(n: int, m: int, chars: TestCharacteristics,
                prior: Prior | SecretDistribution | None, config: ESConfig,
                scorer=None) -> ESResult:
    """Best design multiset found within the evaluation budget.

    The population holds one individual, initialized to the zero design
    that tests nobody.  Each generation evaluates an iterated chain of
    lam mutants and keeps the best strictly-improving one (the parent
    wins ties, for stability on plateaus).  Restart r runs for
    luby(r) * luby_base fitness lookups with a fresh RNG stream derived
    from (seed, r); the best individual ever seen is returned.
    """
    if scorer is None:
        if prior is None:
            raise ValidationError("need a prior or an explicit scorer")
        dist = prior.distribution() if isinstance(prior, Prior) else prior

        def scorer(rows: tuple[int, ...]) -> float:
            return score_multiset(dist, DesignMatrix.from_row_ints(rows, n),
                                  chars, config.objective)

    lam = config.lam if config.lam is not None else max(4, (n * m) // 8)
    base = config.luby_base if config.luby_base is not None else max(1, n * m)

    best_rows: np.ndarray | None = None
    best_score = -np.inf
    trace: list[float] = []
    evals = 0
    restart = 0

    while evals < config.budget:
        rng = make_stream(config.seed, restart)
        epoch_budget = luby(restart + 1, base)
        epoch_evals = 0
        cache: dict[tuple[int, ...], float] = {}

        def lookup(rows: np.ndarray) -> float:
            nonlocal evals, epoch_evals, best_rows, best_score
            key = tuple(sorted(int(x) for x in rows))
            if key not in cache:
                cache[key] = scorer(key)
            score = cache[key]
            evals += 1
            epoch_evals += 1
            if score > best_score:
                best_score = score
                best_rows = rows.copy()
            trace.append(best_score)
            return score

        parent = np.zeros(m, dtype=np.int64)
        try:
            parent_score = lookup(parent)
        except SaturationError as exc:  # pragma: no cover - needs degenerate constraints
            raise InfeasibleError(str(exc)) from exc

        while epoch_evals < epoch_budget and evals < config.budget:
            chain = parent
            gen_rows: np.ndarray | None = None
            gen_score = -np.inf
            for _ in range(lam):
                if epoch_evals >= epoch_budget or evals >= config.budget:
                    break
                chain = mutate(chain, n, config.constraints, rng)
                score = lookup(chain)
                if score > gen_score:
                    gen_score = score
                    gen_rows = chain
            if gen_rows is not None and gen_score > parent_score:
                parent = gen_rows
                parent_score = gen_score
        restart += 1

    assert best_rows is not None
    return ESResult(
        design=DesignMatrix.from_row_ints((int(x) for x in best_rows), n),
        score=float(best_score),
        trace=np.asarray(trace),
        evaluations=evals,
        restarts=restart,
    )
