"""Principal component analysis over (optionally one-hot encoded) table fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import FieldEncoder
from .table import DataTable, MLError


@dataclass
class PcaModel:
    fields: list[str]
    k: int
    encoder: FieldEncoder
    means: list[float]
    components: list[list[float]]  # k rows, orthonormal
    explained_variance: list[float]  # descending

    def transform(self, table: DataTable) -> np.ndarray:
        X = self.encoder.transform(table)
        centered = X - np.asarray(self.means)
        return centered @ np.asarray(self.components).T

    def apply(self, table: DataTable) -> DataTable:
        scores = self.transform(table)
        out = table
        for i in range(self.k):
            out = out.with_column(f"PC_{i + 1}", [float(v) for v in scores[:, i]])
        return out

    def to_dict(self) -> dict:
        return {
            "fields": self.fields,
            "k": self.k,
            "encoder": self.encoder.to_dict(),
            "means": self.means,
            "components": self.components,
            "explained_variance": self.explained_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PcaModel":
        return cls(
            fields=data["fields"],
            k=data["k"],
            encoder=FieldEncoder.from_dict(data["encoder"]),
            means=data["means"],
            components=data["components"],
            explained_variance=data["explained_variance"],
        )


def fit_pca(table: DataTable, fields: list[str], k: int) -> tuple[PcaModel, DataTable]:
    """Top-k eigenvectors of the centered covariance; returns the model and
    the table with PC_1..PC_k columns appended."""
    if k < 1:
        raise MLError("k must be at least 1")
    if len(table.rows) < 2:
        raise MLError("need at least 2 rows to fit")
    encoder = FieldEncoder.fit(table, fields, standardize=False)
    X = encoder.transform(table)
    if k > X.shape[1]:
        raise MLError(f"k={k} exceeds the {X.shape[1]} encoded features")
    means = X.mean(axis=0)
    centered = X - means
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    components = eigvecs[:, order].T.copy()
    for row in components:  # deterministic sign: dominant coordinate positive
        if row[int(np.argmax(np.abs(row)))] < 0:
            row *= -1
    variance = np.clip(eigvals[order], 0.0, None)
    model = PcaModel(
        fields=list(fields),
        k=k,
        encoder=encoder,
        means=[float(v) for v in means],
        components=[[float(v) for v in row] for row in components],
        explained_variance=[float(v) for v in variance],
    )
    return model, model.apply(table)
