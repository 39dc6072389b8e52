"""Pair-level scoring of a variant's relations against a ground truth."""

from __future__ import annotations

from typing import Optional

from .correlate import correlate
from .model import (
    InconsistentInputError, MetricsReport, RelationSet, TimeWindow, Variant,
)

# Largest grid window of the default sweep; bounds the true-negative universe.
DEFAULT_MAX_WINDOW = TimeWindow(5000, 5000)


def establish_ground_truth(events, flows, window: TimeWindow) -> RelationSet:
    return correlate(events, flows, Variant.ALL_PARAMS, window)


def candidate_universe(events, flows, max_window: Optional[TimeWindow] = DEFAULT_MAX_WINDOW) -> int:
    """Number of event x flow pairs that any variant could match.

    Pairs must agree on server IP, server port and client IP and lie within
    ``max_window``; this is exactly the loosest variant at that window.
    """
    return len(correlate(events, flows, Variant.NO_PORT_SNI, max_window))


def evaluate_variant(ground_truth: RelationSet, predicted: RelationSet,
                     universe_size: int) -> MetricsReport:
    gt, pred = ground_truth.pairs, predicted.pairs
    tp = len(pred & gt)
    fp = len(pred - gt)
    fn = len(gt - pred)
    if universe_size < tp + fp + fn:
        raise InconsistentInputError(
            f"universe of {universe_size} pairs is smaller than |ground truth ∪ predicted| = {tp + fp + fn}")
    tn = universe_size - tp - fp - fn

    # 0/0 -> 1: nothing was wrongly predicted / nothing was missed
    conventions = []
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 1.0
        conventions.append("precision=1 (0/0, nothing predicted)")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 1.0
        conventions.append("recall=1 (0/0, empty ground truth)")
    if universe_size:
        accuracy = (tp + tn) / universe_size
    else:
        accuracy = 1.0
        conventions.append("accuracy=1 (empty universe)")
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport(accuracy, precision, recall, f1, tp, fp, fn, tn, tuple(conventions))
