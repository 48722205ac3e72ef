"""Loopy belief propagation over the pool factor graph.

One factor per test row connects all patients in that pool to the
observed result.  The factor's value depends on the members only through
"is any member positive", which collapses the message computation to a
product of incoming probability-healthy messages: with a_y the
likelihood of the observed bit given pool state y,

    msg(s_i = 0)  proportional to  a1 + (a0 - a1) * prod_{j != i} q_j
    msg(s_i = 1)  proportional to  a1

Leave-one-out products are formed with prefix/suffix arrays (never by
dividing out a factor, so hard-zero messages are safe).  The schedule is
flooding with damping; non-convergence is reported, not raised.
"""

from __future__ import annotations

import numpy as np

from .types import (
    DesignMatrix,
    DimensionError,
    PosteriorSummary,
    Prior,
    Secret,
    TestCharacteristics,
    TestOutcome,
)

__all__ = ["bp_posterior", "BPParams"]


from dataclasses import dataclass


@dataclass(frozen=True)
class BPParams:
    max_iters: int = 200
    damping: float = 0.5
    tol: float = 1e-8


def _leave_one_out_products(values: np.ndarray) -> np.ndarray:
    """out[i] = prod of values except values[i], without division."""
    k = len(values)
    prefix = np.ones(k + 1)
    np.cumprod(values, out=prefix[1:])
    suffix = np.ones(k + 1)
    suffix[:k] = np.cumprod(values[::-1])[::-1]
    return prefix[:k] * suffix[1:]


def bp_posterior(design: DesignMatrix, chars: TestCharacteristics,
                 prior: Prior, outcome: TestOutcome,
                 params: BPParams | None = None) -> PosteriorSummary:
    """Approximate per-patient posteriors for arbitrary problem sizes.

    Exact on tree-structured instances (e.g. disjoint pools); on loopy
    graphs the marginals are the usual loopy-BP approximation.  The
    returned summary carries a convergence flag; the maximum-likelihood
    secret is the per-patient threshold of the beliefs.
    """
    params = params or BPParams()
    if outcome.n != design.m:
        raise DimensionError(
            f"outcome has {outcome.n} bits for a design with {design.m} rows")
    if design.n != prior.n:
        raise DimensionError("design and prior disagree on patient count")
    n, m = design.n, design.m
    p = prior.as_array()

    members = [np.flatnonzero(np.asarray(row.bits)) for row in design.rows]
    rows_of = [[] for _ in range(n)]  # (row, slot within the row)
    for r, mem in enumerate(members):
        for slot, i in enumerate(mem):
            rows_of[int(i)].append((r, slot))

    # a[r, y]: likelihood of the observed bit of row r given pool state y.
    a0 = np.where(np.asarray(outcome.bits) == 1, 1.0 - chars.tnr, chars.tnr)
    a1 = np.where(np.asarray(outcome.bits) == 1, chars.tpr, 1.0 - chars.tpr)

    # q[r][slot]: variable->factor message P(s_i = 0); start from the prior.
    q = [1.0 - p[mem] for mem in members]
    # f0/f1[r][slot]: factor->variable message, normalized.
    f0 = [np.full(len(mem), 0.5) for mem in members]
    f1 = [np.full(len(mem), 0.5) for mem in members]

    converged = False
    iterations = 0
    for iterations in range(1, params.max_iters + 1):
        for r, mem in enumerate(members):
            if len(mem) == 0:
                continue
            loo = _leave_one_out_products(q[r])
            m0 = a1[r] + (a0[r] - a1[r]) * loo
            m1 = np.full(len(mem), a1[r])
            norm = m0 + m1
            f0[r] = m0 / norm
            f1[r] = m1 / norm

        max_change = 0.0
        for i in range(n):
            edges = rows_of[i]
            if not edges:
                continue
            in0 = np.array([f0[r][slot] for r, slot in edges])
            in1 = np.array([f1[r][slot] for r, slot in edges])
            loo0 = (1.0 - p[i]) * _leave_one_out_products(in0)
            loo1 = p[i] * _leave_one_out_products(in1)
            total = loo0 + loo1
            fresh = np.where(total > 0, loo0 / np.where(total > 0, total, 1.0), 0.5)
            for (r, slot), value in zip(edges, fresh):
                new = params.damping * q[r][slot] + (1.0 - params.damping) * value
                max_change = max(max_change, abs(new - q[r][slot]))
                q[r][slot] = new
        if max_change < params.tol:
            converged = True
            break

    # Beliefs from all incoming factor messages.
    belief1 = np.empty(n)
    for i in range(n):
        prod0 = 1.0 - p[i]
        prod1 = p[i]
        for r, slot in rows_of[i]:
            prod0 *= f0[r][slot]
            prod1 *= f1[r][slot]
        total = prod0 + prod1
        belief1[i] = prod1 / total if total > 0 else p[i]

    bits = [1 if b > 0.5 else 0 for b in belief1]
    confidence = float(np.prod(np.maximum(belief1, 1.0 - belief1)))
    return PosteriorSummary(
        marginals=tuple(float(np.clip(b, 0.0, 1.0)) for b in belief1),
        ml_secret=Secret(bits),
        confidence=confidence,
        converged=converged,
    )
