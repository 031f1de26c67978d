"""Multinomial logistic regression trained by batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import FieldEncoder
from .stats import ClassificationStats, classification_stats
from .table import DataTable, MLError, cell_text

MAX_ITERATIONS = 5000
GRAD_TOLERANCE = 1e-6
ARMIJO_C = 1e-4


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss(weights: np.ndarray, X: np.ndarray, Y: np.ndarray) -> float:
    """Mean negative log-likelihood. weights: classes x features, Y: one-hot."""
    probs = softmax(X @ weights.T)
    picked = np.clip((probs * Y).sum(axis=1), 1e-300, None)
    return float(-np.log(picked).mean())


def cross_entropy_grad(weights: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    probs = softmax(X @ weights.T)
    return (probs - Y).T @ X / X.shape[0]


@dataclass
class LogRegModel:
    response: str
    predictors: list[str]
    encoder: FieldEncoder
    classes: list[str]
    weights: list[list[float]]  # classes x features (+1 intercept column when set)
    fit_intercept: bool
    train_fraction: float
    seed: int

    def _design(self, table: DataTable) -> np.ndarray:
        X = self.encoder.transform(table)
        if self.fit_intercept:
            X = np.hstack([X, np.ones((X.shape[0], 1))])
        return X

    def predict(self, table: DataTable) -> list[str]:
        scores = self._design(table) @ np.asarray(self.weights).T
        return [self.classes[i] for i in scores.argmax(axis=1)]

    def apply(self, table: DataTable) -> DataTable:
        return table.with_column(f"predicted({self.response})", self.predict(table))

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "predictors": self.predictors,
            "encoder": self.encoder.to_dict(),
            "classes": self.classes,
            "weights": self.weights,
            "fit_intercept": self.fit_intercept,
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LogRegModel":
        return cls(
            response=data["response"],
            predictors=data["predictors"],
            encoder=FieldEncoder.from_dict(data["encoder"]),
            classes=data["classes"],
            weights=data["weights"],
            fit_intercept=data["fit_intercept"],
            train_fraction=data["train_fraction"],
            seed=data["seed"],
        )


def _descend(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    weights = np.zeros((Y.shape[1], X.shape[1]))
    loss = cross_entropy_loss(weights, X, Y)
    for _ in range(MAX_ITERATIONS):
        grad = cross_entropy_grad(weights, X, Y)
        if np.abs(grad).max() < GRAD_TOLERANCE:
            break
        grad_sq = float((grad * grad).sum())
        step = 1.0
        while step > 1e-12:
            candidate = weights - step * grad
            new_loss = cross_entropy_loss(candidate, X, Y)
            if new_loss <= loss - ARMIJO_C * step * grad_sq:
                break
            step *= 0.5
        weights = weights - step * grad
        loss = cross_entropy_loss(weights, X, Y)
    return weights


def fit_logreg(table: DataTable, response: str, predictors: list[str],
               train_fraction: float = 0.5, seed: int = 0,
               fit_intercept: bool = True) -> tuple[LogRegModel, ClassificationStats]:
    """Seeded shuffle/split, gradient-descent fit, held-out statistics."""
    if not predictors:
        raise MLError("need at least one predictor field")
    if not 0.0 < train_fraction < 1.0:
        raise MLError("train_fraction must be in (0, 1)")
    n = len(table.rows)
    if n < 2:
        raise MLError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = min(max(int(n * train_fraction), 1), n - 1)
    train = table.subset(perm[:n_train])
    test = table.subset(perm[n_train:])

    labels = [cell_text(v) for v in train.column(response)]
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise MLError("training split has fewer than 2 classes")
    encoder = FieldEncoder.fit(train, predictors, standardize=True)
    X = encoder.transform(train)
    if fit_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    class_of = {c: i for i, c in enumerate(classes)}
    Y = np.zeros((len(labels), len(classes)))
    for i, label in enumerate(labels):
        Y[i, class_of[label]] = 1.0
    weights = _descend(X, Y)
    model = LogRegModel(
        response=response,
        predictors=list(predictors),
        encoder=encoder,
        classes=classes,
        weights=[[float(v) for v in row] for row in weights],
        fit_intercept=fit_intercept,
        train_fraction=train_fraction,
        seed=seed,
    )
    actual = [cell_text(v) for v in test.column(response)]
    predicted = model.predict(test)
    return model, classification_stats(actual, predicted)
