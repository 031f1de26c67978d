"""Classification quality measures: confusion matrix and macro-averaged scores."""

from __future__ import annotations

from dataclasses import dataclass, field

from .table import MLError, cell_text


@dataclass
class ClassificationStats:
    precision: float
    recall: float
    accuracy: float
    f1: float
    labels: list[str]
    confusion: list[list[int]]  # actual x predicted, in label order
    per_class: dict[str, dict] = field(default_factory=dict)

    def confusion_cell(self, actual: str, predicted: str) -> int:
        return self.confusion[self.labels.index(actual)][self.labels.index(predicted)]


def confusion_matrix(actual: list, predicted: list) -> tuple[list[str], list[list[int]]]:
    if len(actual) != len(predicted):
        raise MLError("actual and predicted lengths differ")
    labels = sorted({cell_text(v) for v in actual} | {cell_text(v) for v in predicted})
    pos = {label: i for i, label in enumerate(labels)}
    matrix = [[0] * len(labels) for _ in labels]
    for a, p in zip(actual, predicted):
        matrix[pos[cell_text(a)]][pos[cell_text(p)]] += 1
    return labels, matrix


def classification_stats(actual: list, predicted: list) -> ClassificationStats:
    """Macro precision/recall/F1 and accuracy; 0/0 ratios count as 0."""
    labels, matrix = confusion_matrix(actual, predicted)
    total = sum(sum(row) for row in matrix)
    if total == 0:
        raise MLError("no rows to score")
    correct = sum(matrix[i][i] for i in range(len(labels)))
    per_class = {}
    precisions, recalls, f1s = [], [], []
    for i, label in enumerate(labels):
        tp = matrix[i][i]
        predicted_count = sum(matrix[j][i] for j in range(len(labels)))
        actual_count = sum(matrix[i])
        prec = tp / predicted_count if predicted_count else 0.0
        rec = tp / actual_count if actual_count else 0.0
        f1 = 2 * prec * rec / (prec + rec) if (prec + rec) else 0.0
        per_class[label] = {
            "precision": prec, "recall": rec, "f1": f1, "support": actual_count,
        }
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
    return ClassificationStats(
        precision=sum(precisions) / len(labels),
        recall=sum(recalls) / len(labels),
        accuracy=correct / total,
        f1=sum(f1s) / len(labels),
        labels=labels,
        confusion=matrix,
        per_class=per_class,
    )
