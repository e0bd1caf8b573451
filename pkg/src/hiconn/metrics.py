"""Binary classification metrics, reported as percentages."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class Metrics:
    """Accuracy and positive-class F1 in percent, plus raw confusion counts.

    Confusion layout: [[tn, fp], [fn, tp]], positive class = label 1.
    """

    accuracy: float
    f1: float
    confusion: list

    def to_json(self) -> dict:
        return {"accuracy": self.accuracy, "f1": self.f1, "confusion": self.confusion}

    def format_row(self) -> str:
        return f"{self.accuracy:.2f}\t{self.f1:.2f}"


def compute_metrics(y_true, y_pred) -> Metrics:
    """Metrics from parallel label sequences; F1 is 0 when precision+recall is 0."""
    tn = fp = fn = tp = 0
    for t, p in zip(y_true, y_pred, strict=True):
        if t == 1:
            tp += p == 1
            fn += p == 0
        else:
            fp += p == 1
            tn += p == 0
    total = tn + fp + fn + tp
    accuracy = 100.0 * (tp + tn) / total if total else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 100.0 * 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(accuracy=accuracy, f1=f1, confusion=[[int(tn), int(fp)], [int(fn), int(tp)]])
