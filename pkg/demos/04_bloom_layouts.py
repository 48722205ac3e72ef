"""
Balanced Bloom arrays for larger cohorts
========================================

Information-optimal search is hopeless past a few dozen patients, but a
randomized array of balanced partitions scales: split the m tests into g
groups of b pools and spread patients evenly in each group.  Every
patient lands in exactly g pools; a patient is suspect only if all g of
its pools light up.
"""

import math

import numpy as np

from poolkit import Prior, TestCharacteristics, TestOutcome
from poolkit.bloom import (
    balanced_assignment_nonuniform,
    build_layout,
    optimal_pool_positive_prob,
    perfect_decode,
    plan_dimensions,
    pool_positive_probabilities,
)

# How many groups for 100 patients, 20 tests, 1% prevalence?
plan = plan_dimensions(n=100, m=20, prevalence=0.01)
print(f"plan: g={plan.g} groups x b={plan.b} pools "
      f"(ideal g = {plan.g_unclamped:.2f}, {plan.unused_tests} tests spare)")

layout = build_layout(n=100, g=plan.g, b=plan.b, seed=7)
matrix = layout.to_design_matrix()
sizes = sorted(row.pool_size() for row in matrix.rows)
print(f"pool sizes range {sizes[0]}..{sizes[-1]} (balanced within one)")

# Perfect-test decoding: suspects are patients whose pools all read
# positive.  With one true positive, the suspect set contains the truth.
truth = 17
bits = [0] * layout.m
for row in layout.patient_rows(truth):
    bits[row] = 1
suspects = perfect_decode(layout, TestOutcome(bits))
print(f"patient {truth} infected -> suspects: {np.flatnonzero(suspects).tolist()}")

# With unequal priors, balance the pools by weight instead of by count,
# aiming every pool at the same probability of testing positive.
priors = Prior([0.30, 0.02, 0.02, 0.02, 0.02, 0.02, 0.25, 0.02])
weighted = balanced_assignment_nonuniform(priors, g=1, b=2)
probs = pool_positive_probabilities(weighted, priors)
print(f"\nweight-balanced pools read positive with probabilities "
      f"{np.round(probs, 4).tolist()}")

# The ideal per-pool hit probability depends only on the test quality:
# exactly one half for symmetric errors, shifted otherwise.
for tpr, tnr in [(0.9, 0.9), (0.99, 0.90), (0.99, 0.999)]:
    rho = optimal_pool_positive_prob(TestCharacteristics(tpr, tnr))
    print(f"tpr={tpr:<5} tnr={tnr:<6} -> best pool-hit probability {rho:.4f}")
