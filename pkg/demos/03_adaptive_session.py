"""
Greedy adaptive testing, one result at a time
=============================================

When the lab can process tests sequentially, each next pool can be
chosen to maximize the information of its own outcome under the current
posterior.  This simulates the operator loop: recommend, observe,
update, repeat, against a hidden ground truth.
"""

import numpy as np

from poolkit import Prior, Secret, TestCharacteristics, entropy, ml_decode
from poolkit.adaptive import record_result, start_session
from poolkit.rng import make_stream

chars = TestCharacteristics(tpr=0.99, tnr=0.90)
truth = Secret("01000010")  # hidden from the session
prior = Prior([0.1] * 8)
rng = make_stream(2024)

session = start_session("demo", prior, chars, tests=6)
print(f"start: H = {entropy(session.posterior):.3f} bits, budget 6 tests\n")

while session.remaining_tests > 0:
    pool = session.recommended
    # The lab draws a noisy result for the recommended pool.
    hit = (pool.index & truth.index) != 0
    p_positive = chars.tpr if hit else 1.0 - chars.tnr
    observed = int(rng.random() < p_positive)
    session = record_result(session, observed)
    print(f"pool {pool} -> {'positive' if observed else 'negative'}   "
          f"H = {entropy(session.posterior):.3f} bits")

secret, confidence = ml_decode(session.posterior)
print(f"\ndiagnosis {secret} with confidence {confidence:.4f} (truth {truth})")
print("marginals:", np.round(session.posterior.marginals(), 3))

# Semi-adaptive labs run tests in batches instead; a batch jointly
# maximizing information beats picking the single best pool twice.
from poolkit.adaptive import k_greedy_batch

batch = k_greedy_batch(Prior([0.1] * 4), chars, batch_size=2)
print("\nbatch of two for four fresh patients:")
for row in batch.rows:
    print("  ", row)
