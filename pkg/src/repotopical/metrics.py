"""Multi-label evaluation: label ranking average precision, micro-averaged
F1, and per-topic threshold optimization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .validation import as_binary_matrix, check_same_shape


def lrap(y, scores) -> float:
    """Label ranking average precision.

    For every true label j of sample i: the fraction of labels scored at or
    above it that are also true, averaged over true labels then samples.
    Ties count via the >= comparison in both rank and the true-label count.
    Every row must have at least one positive.
    """
    y = as_binary_matrix(y, "y")
    f = np.asarray(scores, dtype=np.float64)
    check_same_shape(y, f, ("y", "scores"))
    if y.size == 0:
        raise ValidationError("empty inputs")
    total = 0.0
    for i in range(y.shape[0]):
        positives = np.nonzero(y[i])[0]
        if positives.size == 0:
            raise ValidationError(f"row {i} has no positive label")
        row = f[i]
        acc = 0.0
        for j in positives:
            at_or_above = row >= row[j]
            rank = int(np.count_nonzero(at_or_above))
            hits = int(np.count_nonzero(at_or_above & (y[i] == 1)))
            acc += hits / rank
        total += acc / positives.size
    return total / y.shape[0]


def micro_f1(y, pred) -> tuple[float, float, float]:
    """Micro-averaged (f1, precision, recall) from globally pooled counts.

    Zero denominators yield 0 by convention.
    """
    y = as_binary_matrix(y, "y")
    pred = as_binary_matrix(pred, "pred")
    check_same_shape(y, pred, ("y", "pred"))
    tp = int(np.count_nonzero((y == 1) & (pred == 1)))
    fp = int(np.count_nonzero((y == 0) & (pred == 1)))
    fn = int(np.count_nonzero((y == 1) & (pred == 0)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return f1, precision, recall


def _f1_for_column(truth: np.ndarray, scores: np.ndarray, threshold: float) -> float:
    pred = scores >= threshold
    tp = int(np.count_nonzero(pred & (truth == 1)))
    fp = int(np.count_nonzero(pred & (truth == 0)))
    fn = int(np.count_nonzero(~pred & (truth == 1)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def optimize_thresholds(y_val, f_val) -> np.ndarray:
    """Per-topic score cutoffs maximizing validation F1.

    Candidates are midpoints between consecutive distinct scores of the
    column plus 0 and 1; F1 only changes at observed scores, so the sweep is
    exact over the continuum. Ties keep the smallest candidate. A column
    with no validation positives gets the degenerate threshold 1.
    """
    y = as_binary_matrix(y_val, "y_val")
    f = np.asarray(f_val, dtype=np.float64)
    check_same_shape(y, f, ("y_val", "f_val"))
    if y.shape[0] < 1:
        raise ValidationError("need at least one validation row")
    thresholds = np.empty(y.shape[1])
    for j in range(y.shape[1]):
        truth, scores = y[:, j], f[:, j]
        if not truth.any():
            thresholds[j] = 1.0
            continue
        distinct = np.unique(scores)
        candidates = [0.0] + [
            float((a + b) / 2.0) for a, b in zip(distinct, distinct[1:])
        ] + [1.0]
        best_t, best_f1 = None, -1.0
        for cand in candidates:
            score = _f1_for_column(truth, scores, cand)
            if score > best_f1:
                best_t, best_f1 = cand, score
        thresholds[j] = best_t
    return thresholds


def apply_thresholds(scores, thresholds) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    return (scores >= thresholds).astype(np.int64)


@dataclass
class EvalReport:
    lrap: float
    micro_f1: float
    precision: float
    recall: float
    per_topic_thresholds: list[float]
    config: dict = field(default_factory=dict)
    split_sizes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lrap": self.lrap,
            "micro_f1": self.micro_f1,
            "precision": self.precision,
            "recall": self.recall,
            "per_topic_thresholds": list(self.per_topic_thresholds),
            "mean_threshold": float(np.mean(self.per_topic_thresholds))
            if len(self.per_topic_thresholds)
            else 0.0,
            "config": self.config,
            "split_sizes": self.split_sizes,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def evaluate_scores(
    y_val, f_val, y_test, f_test, config: dict | None = None, split_sizes: dict | None = None
) -> EvalReport:
    """Optimize thresholds on validation scores, report metrics on test."""
    thresholds = optimize_thresholds(y_val, f_val)
    pred = apply_thresholds(f_test, thresholds)
    f1, precision, recall = micro_f1(y_test, pred)
    return EvalReport(
        lrap=lrap(y_test, f_test),
        micro_f1=f1,
        precision=precision,
        recall=recall,
        per_topic_thresholds=[float(t) for t in thresholds],
        config=config or {},
        split_sizes=split_sizes or {},
    )
