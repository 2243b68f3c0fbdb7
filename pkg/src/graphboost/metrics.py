"""Evaluation: weighted one-vs-rest AUROC, accuracy, confusion counts."""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError

log = logging.getLogger("graphboost.metrics")


@dataclass
class EvalReport:
    weighted_auroc: float
    per_class_auroc: list  # one entry per class, None where undefined
    accuracy: float
    confusion: np.ndarray  # K x K, rows = true class, cols = predicted
    n: int

    def to_dict(self) -> dict:
        return {
            "weighted_auroc": float(self.weighted_auroc),
            "accuracy": float(self.accuracy),
            "per_class_auroc": [None if a is None else float(a)
                                for a in self.per_class_auroc],
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "n": int(self.n),
        }


def auroc_binary(scores: np.ndarray, positives: np.ndarray) -> float:
    """Mann-Whitney AUROC with midrank tie handling, O(n log n).

    Equals (#{score_pos > score_neg} + 0.5 * #ties) / (P * N).
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    positives = np.asarray(positives, dtype=bool).ravel()
    if scores.shape != positives.shape:
        raise DataError("scores and positives differ in length")
    n_pos = int(positives.sum())
    n_neg = positives.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC undefined: need at least one positive and "
                        "one negative")

    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    ranks = np.empty(scores.size, dtype=np.float64)
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[positives].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def weighted_auroc(scores: np.ndarray, y: np.ndarray) -> float:
    """Support-weighted mean of one-vs-rest AUROCs.

    Classes without both positives and negatives are excluded with a
    warning; the weights renormalize over the included classes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if scores.ndim != 2 or scores.shape[0] != y.shape[0]:
        raise DataError("score matrix and labels are inconsistent")
    n, k = scores.shape
    total = 0.0
    weight = 0.0
    for c in range(k):
        pos = y == c
        support = int(pos.sum())
        if support == 0 or support == n:
            log.warning("class %d excluded from weighted AUROC "
                        "(support %d of %d)", c, support, n)
            continue
        total += support * auroc_binary(scores[:, c], pos)
        weight += support
    if weight == 0.0:
        raise DataError("no class has both positives and negatives")
    return total / weight


def evaluate_scores(scores: np.ndarray, labels: np.ndarray, y: np.ndarray,
                    n_classes: int) -> EvalReport:
    """Full report from score matrix, hard labels, and true labels."""
    y = np.asarray(y)
    n = y.shape[0]
    per_class = []
    for c in range(n_classes):
        pos = y == c
        support = int(pos.sum())
        if support == 0 or support == n:
            per_class.append(None)
        else:
            per_class.append(auroc_binary(scores[:, c], pos))
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y, labels), 1)
    accuracy = float(np.mean(labels == y))
    return EvalReport(weighted_auroc(scores, y), per_class, accuracy,
                      confusion, n)
