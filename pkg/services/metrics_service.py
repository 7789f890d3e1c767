"""
Metrics Service for precision / recall / F1 over emphasis decisions
"""
from typing import Iterable, Sequence, Tuple

import numpy as np

from models import PRFScore


class MetricsService:
    """Precision, recall and F1 with the zero-denominator convention"""

    @staticmethod
    def compute_prf(tp: int, fp: int, fn: int) -> PRFScore:
        """
        Compute precision, recall and F1 from counts

        An empty denominator yields 0, so (0, 0, 0) scores (0, 0, 0).

        Args:
            tp: True positives
            fp: False positives
            fn: False negatives

        Returns:
            PRFScore
        """
        if min(tp, fp, fn) < 0:
            raise ValueError(f"counts must be non-negative, got tp={tp}, fp={fp}, fn={fn}")
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return PRFScore(precision=precision, recall=recall, f1=f1)

    @staticmethod
    def count_sets(expected: Iterable[int], predicted: Iterable[int]) -> Tuple[int, int, int]:
        """(tp, fp, fn) of two index sets."""
        expected, predicted = set(expected), set(predicted)
        return len(expected & predicted), len(predicted - expected), len(expected - predicted)

    @staticmethod
    def count_binary(gold: Sequence[bool], predicted: Sequence[bool]) -> Tuple[int, int, int]:
        """(tp, fp, fn) of two aligned binary decision vectors."""
        gold_arr = np.asarray(gold, dtype=bool)
        pred_arr = np.asarray(predicted, dtype=bool)
        if gold_arr.shape != pred_arr.shape:
            raise ValueError(f"decision vectors differ in length: {gold_arr.shape} vs {pred_arr.shape}")
        tp = int(np.sum(gold_arr & pred_arr))
        fp = int(np.sum(~gold_arr & pred_arr))
        fn = int(np.sum(gold_arr & ~pred_arr))
        return tp, fp, fn
