"""Monte-Carlo harness: trial streams, decoding, and evaluation reports.

Determinism contract: trial t draws its secret and outcome noise from the
Philox stream (seed, t); design construction inside an experiment derives
its own seed from the experiment seed, so reports are byte-identical
given (config, seed).  In comparisons all arms share each trial's secret
and consume outcome noise from the trial stream in arm order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import bloom, bp, metrics, mitm, model, oracle
from .evolve import ESConfig, es_optimize
from .rng import GENERATOR_NAME, derive_seed, make_stream
from .types import (
    DENSE_MAX_N,
    ConfigError,
    DesignMatrix,
    NoPlausibleExplanationError,
    PoolingConstraints,
    Prior,
    Secret,
    TestCharacteristics,
    TestOutcome,
)

__all__ = [
    "simulate_outcome",
    "simulate_outcome_bits",
    "DesignSpec",
    "DecoderSpec",
    "ExperimentConfig",
    "EvalReport",
    "materialize_design",
    "run_experiment",
    "run_comparison",
    "analytic_patient_curves",
]


def simulate_outcome_bits(rows: np.ndarray, secret_bits: np.ndarray,
                          chars: TestCharacteristics,
                          rng: np.random.Generator) -> np.ndarray:
    """Array-level outcome draw: rows is an (m, n) boolean membership matrix."""
    hits = rows @ secret_bits.astype(np.int64) > 0
    p_positive = np.where(hits, chars.tpr, 1.0 - chars.tnr)
    return rng.random(len(rows)) < p_positive


def simulate_outcome(design: DesignMatrix, secret: Secret,
                     chars: TestCharacteristics,
                     rng: np.random.Generator) -> TestOutcome:
    """Draw one noisy lab outcome for a design and a true secret."""
    rows = np.array([r.bits for r in design.rows], dtype=bool)
    bits = simulate_outcome_bits(rows, np.asarray(secret.bits), chars, rng)
    return TestOutcome(bits.astype(int).tolist())


@dataclass(frozen=True)
class DesignSpec:
    """Where the experiment's design comes from."""

    kind: Literal["es", "bloom", "file", "leave-one-out"]
    g: int | None = None
    b: int | None = None
    path: str | None = None
    budget: int = 20_000
    objective: oracle.Objective = "neg-conditional-entropy"
    max_pool_size: int | None = None
    max_splits_per_sample: int | None = None

    def summary(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "bloom":
            out.update(g=self.g, b=self.b)
        if self.kind == "es":
            out.update(budget=self.budget, objective=self.objective,
                       max_pool_size=self.max_pool_size,
                       max_splits_per_sample=self.max_splits_per_sample)
        if self.kind == "file":
            out.update(path=self.path)
        return out


@dataclass(frozen=True)
class DecoderSpec:
    """Which posterior decoder scores the patients."""

    kind: Literal["exact", "mitm", "bp", "perfect"]
    epsilon: float = mitm.DEFAULT_EPSILON
    max_iters: int = 200
    damping: float = 0.5
    tol: float = 1e-8

    def summary(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "mitm":
            out["epsilon"] = self.epsilon
        if self.kind == "bp":
            out.update(max_iters=self.max_iters, damping=self.damping, tol=self.tol)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m: int
    chars: TestCharacteristics
    prior: Prior
    design: DesignSpec
    decoder: DecoderSpec
    trials: int
    seed: int

    @classmethod
    def with_prevalence(cls, n: int, m: int, chars: TestCharacteristics,
                        prevalence: float, design: DesignSpec, decoder: DecoderSpec,
                        trials: int, seed: int) -> "ExperimentConfig":
        return cls(n=n, m=m, chars=chars, prior=Prior.uniform(n, prevalence),
                   design=design, decoder=decoder, trials=trials, seed=seed)

    def summary(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "tpr": self.chars.tpr,
            "tnr": self.chars.tnr,
            "priors": list(self.prior.probs),
            "design": self.design.summary(),
            "decoder": self.decoder.summary(),
            "trials": self.trials,
        }


def materialize_design(config: ExperimentConfig) -> tuple[DesignMatrix, bloom.BloomLayout | None]:
    """Build the experiment's design; deterministic given the config."""
    spec = config.design
    if spec.kind == "leave-one-out":
        if config.m != config.n:
            raise ConfigError("leave-one-out designs need m == n")
        full = (1 << config.n) - 1
        rows = [full ^ (1 << (config.n - 1 - i)) for i in range(config.n)]
        return DesignMatrix.from_row_ints(rows, config.n), None
    if spec.kind == "bloom":
        if spec.g is not None and spec.b is not None:
            g, b = spec.g, spec.b
        else:
            plan = bloom.plan_dimensions(config.n, config.m,
                                         float(np.max(config.prior.as_array())))
            g, b = plan.g, plan.b
        if g * b != config.m:
            raise ConfigError(f"bloom {g}x{b} uses {g * b} tests but m = {config.m}")
        layout = bloom.build_layout(config.n, g, b, derive_seed(config.seed, "design"))
        return layout.to_design_matrix(), layout
    if spec.kind == "es":
        constraints = PoolingConstraints(max_pool_size=spec.max_pool_size,
                                         max_splits_per_sample=spec.max_splits_per_sample)
        es_config = ESConfig(budget=spec.budget, seed=derive_seed(config.seed, "design"),
                             objective=spec.objective, constraints=constraints)
        result = es_optimize(config.n, config.m, config.chars, config.prior, es_config)
        return result.design, None
    if spec.kind == "file":
        from . import fileformats

        design, layout = fileformats.read_design(spec.path)
        if design.n != config.n or design.m != config.m:
            raise ConfigError("design file does not match the configured n, m")
        return design, layout
    raise ConfigError(f"unknown design source {spec.kind!r}")


_FALLBACK_STEPS = 3
_FALLBACK_FACTOR = 1e-3


class _Decoder:
    """Per-outcome scorer with memoization (outcomes repeat heavily)."""

    def __init__(self, config: ExperimentConfig, design: DesignMatrix,
                 layout: bloom.BloomLayout | None):
        self.config = config
        self.design = design
        self.layout = layout
        self.cache: dict[bytes, np.ndarray] = {}
        self.counters = {
            "decode_calls": 0,
            "distinct_outcomes": 0,
            "mitm_stored_branch": 0,
            "mitm_corruption_branch": 0,
            "mitm_cutoff_fallbacks": 0,
            "bp_not_converged": 0,
        }
        kind = config.decoder.kind
        if kind == "perfect" and layout is None:
            raise ConfigError("the perfect decoder requires a bloom layout")
        if kind == "exact" and config.n > DENSE_MAX_N:
            raise ConfigError(f"exact decoding needs n <= {DENSE_MAX_N}")
        if kind == "mitm":
            self.table = mitm.mitm_preprocess(design, config.prior.as_array(),
                                              config.decoder.epsilon)
        if kind == "exact":
            self.dist = config.prior.distribution()

    def scores(self, outcome_bits: np.ndarray) -> np.ndarray:
        self.counters["decode_calls"] += 1
        key = outcome_bits.astype(np.uint8).tobytes()
        if key in self.cache:
            return self.cache[key]
        self.counters["distinct_outcomes"] += 1
        outcome = TestOutcome(outcome_bits.astype(int).tolist())
        kind = self.config.decoder.kind
        if kind == "exact":
            post = model.posterior_update(self.dist, self.design, outcome,
                                          self.config.chars)
            result = post.marginals()
        elif kind == "mitm":
            result = self._mitm_scores(outcome)
        elif kind == "bp":
            spec = self.config.decoder
            summary = bp.bp_posterior(self.design, self.config.chars,
                                      self.config.prior, outcome,
                                      bp.BPParams(spec.max_iters, spec.damping, spec.tol))
            if not summary.converged:
                self.counters["bp_not_converged"] += 1
            result = np.asarray(summary.marginals)
        elif kind == "perfect":
            result = bloom.perfect_decode(self.layout, outcome).astype(np.float64)
        else:
            raise ConfigError(f"unknown decoder {kind!r}")
        self.cache[key] = result
        return result

    def _mitm_scores(self, outcome: TestOutcome) -> np.ndarray:
        cutoff = self.table.epsilon
        for _ in range(_FALLBACK_STEPS + 1):
            try:
                answer = mitm.mitm_query(self.table, outcome, self.config.chars,
                                         cutoff=cutoff)
            except NoPlausibleExplanationError:
                cutoff *= _FALLBACK_FACTOR
                self.counters["mitm_cutoff_fallbacks"] += 1
                continue
            branch = ("mitm_stored_branch" if answer.branch == "stored-codes"
                      else "mitm_corruption_branch")
            self.counters[branch] += 1
            return np.asarray(answer.marginals)
        # Out of retries: score by the prior (recorded; keeps the run total).
        self.counters["mitm_cutoff_fallbacks"] += 1
        return self.config.prior.as_array()


_MAX_CURVE_POINTS = 512


def _downsample(values: np.ndarray) -> list[float]:
    if len(values) <= _MAX_CURVE_POINTS:
        return [float(v) for v in values]
    idx = np.unique(np.linspace(0, len(values) - 1, _MAX_CURVE_POINTS).round().astype(int))
    return [float(v) for v in values[idx]]


def _nan_to_none(x: float) -> float | None:
    return None if np.isnan(x) else float(x)


@dataclass
class EvalReport:
    """Serializable evaluation summary.

    The canonical JSON form contains only deterministic content; wall
    time lives in ``wall_time_s`` and is excluded from serialization.
    """

    config: dict
    seed: int
    rng: dict
    trials: int
    n: int
    positives: int
    negatives: int
    pr_auc: float | None
    roc_auc: float | None
    pr_curve: dict
    roc_curve: dict
    per_patient_pr_auc: list[float | None]
    per_patient_curves: list[dict] | None
    fairness_spread: float | None
    confusion: dict
    mean_posterior_entropy: float
    counters: dict
    degenerate_note: str | None = None
    wall_time_s: float = field(default=0.0, compare=False)

    def to_json(self) -> str:
        payload = {k: v for k, v in self.__dict__.items() if k != "wall_time_s"}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def to_text(self) -> str:
        lines = [
            f"trials            {self.trials}",
            f"patients          {self.n}",
            f"positives         {self.positives}",
            f"negatives         {self.negatives}",
            f"PR-AUC            {self.pr_auc}",
            f"ROC-AUC           {self.roc_auc}",
            f"fairness spread   {self.fairness_spread}",
            f"mean posterior H  {self.mean_posterior_entropy:.6f}",
            "confusion@0.5     " + " ".join(f"{k}={v}" for k, v in sorted(self.confusion.items())),
        ]
        if self.degenerate_note:
            lines.append(f"note              {self.degenerate_note}")
        for key, value in sorted(self.counters.items()):
            lines.append(f"counter {key:<18} {value}")
        return "\n".join(lines)


def run_experiment(config: ExperimentConfig) -> EvalReport:
    """Simulate, decode, and evaluate one configuration."""
    started = time.perf_counter()
    design, layout = materialize_design(config)
    decoder = _Decoder(config, design, layout)
    rows = np.array([r.bits for r in design.rows], dtype=bool)
    p_arr = config.prior.as_array()

    scores = np.empty((config.trials, config.n))
    truth = np.empty((config.trials, config.n), dtype=bool)
    for trial in range(config.trials):
        rng = make_stream(config.seed, trial)
        secret_bits = rng.random(config.n) < p_arr
        outcome_bits = simulate_outcome_bits(rows, secret_bits, config.chars, rng)
        truth[trial] = secret_bits
        scores[trial] = decoder.scores(outcome_bits)

    return _evaluate(config, scores, truth, decoder.counters,
                     time.perf_counter() - started)


def _evaluate(config: ExperimentConfig, scores: np.ndarray, truth: np.ndarray,
              counters: dict, wall_time: float) -> EvalReport:
    positives = int(truth.sum())
    negatives = truth.size - positives
    overall = metrics.curves_from_samples(scores.ravel(), truth.ravel())
    note = None
    if positives == 0:
        note = "degenerate: no positive class; PR metrics undefined"
    elif negatives == 0:
        note = "degenerate: no negative class; ROC metrics undefined"

    per_patient: list[float | None] = []
    patient_curves: list[dict] = []
    for i in range(config.n):
        if truth[:, i].any() and (~truth[:, i]).any():
            curves = metrics.curves_from_samples(scores[:, i], truth[:, i])
            per_patient.append(float(curves.pr_auc))
            patient_curves.append({"precision": _downsample(curves.precision),
                                   "recall": _downsample(curves.recall)})
        else:
            per_patient.append(None)
            patient_curves.append({"precision": [], "recall": []})
    defined = [v for v in per_patient if v is not None]
    spread = (max(defined) - min(defined)) if len(defined) == config.n else None
    # Full fairness curves only at operator scale; AUCs always.
    keep_curves = patient_curves if config.n <= 16 else None

    mean_entropy = float(np.mean(np.sum(model.binary_entropy(scores), axis=1)))
    return EvalReport(
        config=config.summary(),
        seed=config.seed,
        rng={"generator": GENERATOR_NAME, "stream": "(seed, trial_index)"},
        trials=config.trials,
        n=config.n,
        positives=positives,
        negatives=negatives,
        pr_auc=_nan_to_none(overall.pr_auc),
        roc_auc=_nan_to_none(overall.roc_auc),
        pr_curve={"thresholds": _downsample(overall.thresholds),
                  "precision": _downsample(overall.precision),
                  "recall": _downsample(overall.recall)},
        roc_curve={"fpr": _downsample(overall.fpr), "tpr": _downsample(overall.tpr)},
        per_patient_pr_auc=per_patient,
        per_patient_curves=keep_curves,
        fairness_spread=spread,
        confusion=metrics.confusion_counts(scores.ravel(), truth.ravel()),
        mean_posterior_entropy=mean_entropy,
        counters=dict(counters),
        degenerate_note=note,
        wall_time_s=wall_time,
    )


def run_comparison(configs: dict[str, ExperimentConfig]) -> dict[str, EvalReport]:
    """Run several arms on identical trial secrets.

    All configs must agree on n, prior, trials, and seed.  Each trial's
    stream yields the shared secret first, then outcome noise for each
    arm in sorted label order.
    """
    labels = sorted(configs)
    first = configs[labels[0]]
    for cfg in configs.values():
        if (cfg.n, cfg.prior, cfg.trials, cfg.seed) != (
                first.n, first.prior, first.trials, first.seed):
            raise ConfigError("comparison arms must share n, prior, trials, seed")

    arms = {}
    for label in labels:
        cfg = configs[label]
        design, layout = materialize_design(cfg)
        arms[label] = (cfg, design, layout,
                       np.array([r.bits for r in design.rows], dtype=bool),
                       _Decoder(cfg, design, layout))

    p_arr = first.prior.as_array()
    scores = {label: np.empty((first.trials, first.n)) for label in labels}
    truth = np.empty((first.trials, first.n), dtype=bool)
    for trial in range(first.trials):
        rng = make_stream(first.seed, trial)
        secret_bits = rng.random(first.n) < p_arr
        truth[trial] = secret_bits
        for label in labels:
            cfg, design, layout, rows, decoder = arms[label]
            outcome_bits = simulate_outcome_bits(rows, secret_bits, cfg.chars, rng)
            scores[label][trial] = decoder.scores(outcome_bits)

    reports = {}
    for label in labels:
        cfg, _, _, _, decoder = arms[label]
        reports[label] = _evaluate(cfg, scores[label], truth, decoder.counters, 0.0)
    return reports


def analytic_patient_curves(design: DesignMatrix, prior: Prior,
                            chars: TestCharacteristics) -> list[metrics.ClassificationCurves]:
    """Exact per-patient curves from the full (outcome, secret) joint.

    Every outcome is enumerated with its probability and exact posterior
    marginals, so the curves carry no Monte-Carlo noise.  Feasible for
    small n and m only.
    """
    n, m = design.n, design.m
    dist = prior.distribution()
    n_outcomes = 1 << m
    scores = np.empty((n_outcomes, n))
    weight_pos = np.empty((n_outcomes, n))
    weight_neg = np.empty((n_outcomes, n))
    for t in range(n_outcomes):
        outcome = TestOutcome.from_index(t, m)
        weights = dist.probs.copy()
        for row, bit in zip(design.rows, outcome.bits):
            weights *= model._row_likelihoods(n, row.index, bit, chars)
        p_t = float(weights.sum())
        post = weights / p_t if p_t > 0 else weights
        marg = np.array([
            post[((np.arange(1 << n) >> (n - 1 - i)) & 1).astype(bool)].sum()
            for i in range(n)
        ])
        scores[t] = marg
        weight_pos[t] = p_t * marg
        weight_neg[t] = p_t * (1.0 - marg)
    return [
        metrics.curves_from_weights(scores[:, i], weight_pos[:, i], weight_neg[:, i])
        for i in range(n)
    ]
