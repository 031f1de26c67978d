"""Analytics: PCA, logistic regression, classification scoring, outliers."""

from __future__ import annotations

from .anomaly import AnomalyRow, anomaly_detect
from .encoding import FieldEncoder
from .logreg import (
    LogRegModel,
    cross_entropy_grad,
    cross_entropy_loss,
    fit_logreg,
)
from .pca import PcaModel, fit_pca
from .persistence import load_model, model_path, save_model
from .stats import ClassificationStats, classification_stats, confusion_matrix
from .table import DataTable, MLError

__all__ = [
    "AnomalyRow", "ClassificationStats", "DataTable", "FieldEncoder",
    "LogRegModel", "MLError", "PcaModel", "anomaly_detect",
    "classification_stats", "confusion_matrix", "cross_entropy_grad",
    "cross_entropy_loss", "fit_logreg", "fit_pca", "load_model", "model_path",
    "save_model", "apply_model",
]


def apply_model(model, table: DataTable) -> DataTable:
    """Apply a fitted PCA or logistic-regression model to a table."""
    return model.apply(table)


# --- bridges for the query pipeline stages ---------------------------------


def _to_datatable(table) -> DataTable:
    return DataTable(list(table.columns), [list(r) for r in table.rows])


def anomaly_from_result_table(table, fields: list[str], threshold: float):
    from ..query.executor import ResultTable

    annotated = anomaly_detect(_to_datatable(table), fields, threshold)
    columns = list(table.columns) + ["probability", "probable_cause", "isOutlier"]
    rows, prov = [], []
    for row in annotated:
        rows.append(row.cells + [row.probability, row.probable_cause, row.is_outlier])
        prov.append(table.provenance[row.row_index] if table.provenance else None)
    return ResultTable(columns, rows, prov if table.provenance else None)


def fit_from_result_table(stage, table, model_dir):
    from ..query.executor import ResultTable

    data = _to_datatable(table)
    if stage.algo == "pca":
        model, out = fit_pca(data, stage.fields, stage.k)
        save_model(model, model_dir, stage.model_name)
    else:
        model, holdout = fit_logreg(
            data, stage.response, stage.predictors,
            train_fraction=stage.train_fraction, seed=stage.seed,
            fit_intercept=stage.fit_intercept,
        )
        save_model(model, model_dir, stage.model_name, extra={
            "holdout": {
                "precision": holdout.precision,
                "recall": holdout.recall,
                "accuracy": holdout.accuracy,
                "f1": holdout.f1,
            },
        })
        out = model.apply(data)
    return ResultTable(out.columns, out.rows, table.provenance)


def apply_from_result_table(name: str, table, model_dir):
    from ..query.executor import ResultTable

    model = load_model(model_dir, name)
    out = model.apply(_to_datatable(table))
    return ResultTable(out.columns, out.rows, table.provenance)


def class_stats_from_result_table(table, actual: str, predicted: str):
    from ..query.executor import ResultTable

    data = _to_datatable(table)
    stats = classification_stats(data.column(actual), data.column(predicted))
    return ResultTable(
        ["precision", "recall", "accuracy", "f1"],
        [[stats.precision, stats.recall, stats.accuracy, stats.f1]],
    )


def confusion_from_result_table(table, actual: str, predicted: str):
    from ..query.executor import ResultTable

    data = _to_datatable(table)
    labels, matrix = confusion_matrix(data.column(actual), data.column(predicted))
    columns = ["actual"] + labels
    rows = [[label] + list(matrix[i]) for i, label in enumerate(labels)]
    return ResultTable(columns, rows)
