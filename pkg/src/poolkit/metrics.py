"""Classification curves for decoder evaluation.

Weighted variants are first-class: analytic evaluations weight each
(score, label) point by its exact probability instead of counting Monte
Carlo samples.  Equal scores are grouped into one threshold so tie order
never affects a curve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import ValidationError

__all__ = ["ClassificationCurves", "curves_from_samples", "curves_from_weights",
           "confusion_counts"]


@dataclass(frozen=True)
class ClassificationCurves:
    """Precision/recall and ROC points over descending score thresholds."""

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    pr_auc: float
    roc_auc: float
    positive_weight: float
    negative_weight: float

    @property
    def degenerate(self) -> bool:
        """True when a class is empty and the curves are undefined."""
        return self.positive_weight == 0.0 or self.negative_weight == 0.0


def curves_from_samples(scores, labels) -> ClassificationCurves:
    """Curves from per-sample scores and binary ground-truth labels."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels must align")
    return curves_from_weights(scores, labels.astype(np.float64),
                               (~labels).astype(np.float64))


def curves_from_weights(scores, positive_weight, negative_weight) -> ClassificationCurves:
    """Curves from scores carrying explicit positive/negative mass."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    pos_w = np.asarray(positive_weight, dtype=np.float64).ravel()
    neg_w = np.asarray(negative_weight, dtype=np.float64).ravel()
    if not (scores.shape == pos_w.shape == neg_w.shape):
        raise ValidationError("scores and weights must align")

    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(pos_w[order])
    fp = np.cumsum(neg_w[order])
    # Last index of each group of equal scores.
    if len(s):
        ends = np.flatnonzero(np.diff(s) != 0)
        ends = np.append(ends, len(s) - 1)
    else:
        ends = np.array([], dtype=int)
    thresholds = s[ends] if len(s) else s
    tp = tp[ends]
    fp = fp[ends]
    total_pos = float(pos_w.sum())
    total_neg = float(neg_w.sum())

    denom = tp + fp
    precision = np.where(denom > 0, tp / np.where(denom > 0, denom, 1.0), 1.0)
    recall = tp / total_pos if total_pos > 0 else np.zeros_like(tp)
    tpr = recall
    fpr = fp / total_neg if total_neg > 0 else np.zeros_like(fp)

    if total_pos > 0:
        prev_recall = np.concatenate(([0.0], recall[:-1]))
        pr_auc = float(((recall - prev_recall) * precision).sum())
    else:
        pr_auc = float("nan")
    if total_pos > 0 and total_neg > 0:
        roc_auc = float(np.trapezoid(np.concatenate(([0.0], tpr)),
                                     np.concatenate(([0.0], fpr))))
    else:
        roc_auc = float("nan")

    return ClassificationCurves(
        thresholds=thresholds, precision=precision, recall=recall,
        fpr=fpr, tpr=tpr, pr_auc=pr_auc, roc_auc=roc_auc,
        positive_weight=total_pos, negative_weight=total_neg,
    )


def confusion_counts(scores, labels, threshold: float = 0.5) -> dict[str, int]:
    """tp/fp/tn/fn counts when calling positive at score > threshold."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    called = scores > threshold
    return {
        "tp": int(np.count_nonzero(called & labels)),
        "fp": int(np.count_nonzero(called & ~labels)),
        "tn": int(np.count_nonzero(~called & ~labels)),
        "fn": int(np.count_nonzero(~called & labels)),
    }
