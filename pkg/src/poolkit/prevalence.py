"""Prevalence estimation from pooled tests.

A pool of k independent samples tests positive with probability
q = 1 - (1 - rho)**k, so the positive fraction of many pools inverts to
a prevalence estimate.  Pooling trades a worse per-test variance factor
for k times fewer tests; the delta method quantifies the trade.  Perfect
tests are assumed throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .types import ValidationError

__all__ = ["PrevalenceEstimate", "estimate_prevalence", "recommended_pool_size",
           "pooled_noise_scale"]


@dataclass(frozen=True)
class PrevalenceEstimate:
    """Point estimate plus per-test noise scales.

    std_individual and std_pooled are the delta-method one-test standard
    deviations; divide by sqrt(pools_tested) for the standard error of
    rho_hat.  At k = 1 the two scales coincide at sqrt(rho*(1-rho)).
    """

    rho_hat: float
    k: int
    pools_tested: int
    positives: int
    std_individual: float
    std_pooled: float
    warning: str | None = None

    def standard_error(self) -> float:
        return self.std_pooled / math.sqrt(self.pools_tested)


def pooled_noise_scale(rho: float, k: int) -> float:
    """Delta-method per-test scale of the pooled estimator.

    (1/k) * sqrt(1 - (1-rho)**k) * (1-rho)**(1 - k/2); reduces to
    sqrt(rho*(1-rho)) at k = 1 and diverges as rho -> 1 for k > 2.
    """
    if rho <= 0.0:
        return 0.0
    if rho >= 1.0:
        # Limits of the formula: 0 for k=1, 1/2 for k=2, divergent beyond.
        return {1: 0.0, 2: 0.5}.get(k, math.inf)
    one_minus = 1.0 - rho
    return math.sqrt(1.0 - one_minus ** k) * one_minus ** (1.0 - k / 2.0) / k


def estimate_prevalence(k: int, pools_tested: int, positives: int) -> PrevalenceEstimate:
    """Invert the positive-pool fraction to a prevalence estimate."""
    if k < 1:
        raise ValidationError("pool size k must be >= 1")
    if pools_tested < 1:
        raise ValidationError("need at least one tested pool")
    if not (0 <= positives <= pools_tested):
        raise ValidationError("positives must lie in [0, pools_tested]")
    q_hat = positives / pools_tested
    warning = None
    if q_hat == 1.0:
        rho_hat = 1.0
        warning = ("every pool tested positive; the estimate saturates at 1 "
                   "and carries no magnitude information")
    elif q_hat == 0.0:
        rho_hat = 0.0
        warning = "no pool tested positive; the estimate saturates at 0"
    elif k == 1:
        rho_hat = q_hat  # bit-exact: unpooled tests invert trivially
    else:
        rho_hat = 1.0 - (1.0 - q_hat) ** (1.0 / k)
    return PrevalenceEstimate(
        rho_hat=rho_hat,
        k=k,
        pools_tested=pools_tested,
        positives=positives,
        std_individual=math.sqrt(rho_hat * (1.0 - rho_hat)),
        std_pooled=pooled_noise_scale(rho_hat, k),
        warning=warning,
    )


def recommended_pool_size(rho_guess: float) -> int:
    """Pool size (1 - rho)/rho, the point where pooling beats single tests."""
    if not (0.0 < rho_guess < 1.0):
        raise ValidationError(f"prevalence guess must lie in (0, 1), got {rho_guess}")
    return max(1, round((1.0 - rho_guess) / rho_guess))
