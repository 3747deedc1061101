from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass
class MacroF1:
    precision: list[float]
    recall: list[float]
    f1: list[float]
    macro_f1: float


def macro_f1(predictions: Sequence[int], labels: Sequence[int], num_classes: int) -> MacroF1:
    """One-vs-rest precision/recall/F1 per class and their unweighted mean.

    Undefined ratios (no predicted or no actual positives) count as 0.
    """
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise ValueError("need at least one prediction")
    prec, rec, f1 = [], [], []
    for c in range(num_classes):
        tp = sum(p == c and y == c for p, y in zip(predictions, labels))
        fp = sum(p == c and y != c for p, y in zip(predictions, labels))
        fn = sum(p != c and y == c for p, y in zip(predictions, labels))
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    return MacroF1(prec, rec, f1, sum(f1) / num_classes)
