"""Binary classification metrics."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def binary_metrics(predictions, labels) -> dict:
    """Precision, recall, F1 and accuracy.

    With no predicted positives precision is reported as 0 and
    ``precision_undefined`` is set; F1 is then 0 as well.
    """
    p = np.asarray(predictions).astype(int).ravel()
    y = np.asarray(labels).astype(int).ravel()
    if p.size != y.size:
        raise ValidationError(f"predictions ({p.size}) and labels ({y.size}) differ in length")
    if p.size == 0:
        raise ValidationError("metrics need at least one sample")
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    tn = int(np.sum((p == 0) & (y == 0)))
    undefined = tp + fp == 0
    precision = 0.0 if undefined else tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "precision": precision, "recall": recall, "f1": f1, "accuracy": (tp + tn) / p.size,
        "tp": tp, "fp": fp, "fn": fn, "tn": tn, "precision_undefined": undefined,
    }


compute_metrics = binary_metrics
