"""poolkit: design pooled (group) tests and decode their noisy results.

The package splits into construction (evolutionary search, balanced
Bloom arrays, greedy adaptive selection), decoding (exact enumeration,
loopy belief propagation, certified meet-in-the-middle), estimation
(pooled prevalence), and a simulation harness with a CLI and HTTP
service on top.
"""

from .types import (
    DesignMatrix,
    GroupTestError,
    PoolDesign,
    PoolingConstraints,
    PosteriorSummary,
    Prior,
    Secret,
    SecretDistribution,
    TestCharacteristics,
    TestOutcome,
)
from .model import (
    conditional_entropy,
    entropy,
    expected_confidence,
    ml_decode,
    mutual_information,
    outcome_likelihood,
    posterior_update,
)

__version__ = "0.1.0"

__all__ = [
    "DesignMatrix", "GroupTestError", "PoolDesign", "PoolingConstraints",
    "PosteriorSummary", "Prior", "Secret", "SecretDistribution",
    "TestCharacteristics", "TestOutcome",
    "conditional_entropy", "entropy", "expected_confidence", "ml_decode",
    "mutual_information", "outcome_likelihood", "posterior_update",
    "__version__",
]
