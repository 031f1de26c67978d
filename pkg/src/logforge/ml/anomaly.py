"""Frequency-based categorical outlier detection.

Each selected field contributes the empirical probability of the row's value
in that column; a row's probability is the product over selected fields
(univariate when one field is chosen). Rows whose probability falls below
threshold x median are flagged, annotated with the field that contributed the
rarest value.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from .table import DataTable, MLError, cell_text


@dataclass
class AnomalyRow:
    cells: list
    row_index: int  # position in the input table
    probability: float
    probable_cause: str  # empty unless flagged
    is_outlier: int  # 0 | 1


def anomaly_detect(table: DataTable, fields: list[str],
                   threshold: float = 0.01) -> list[AnomalyRow]:
    """Annotated rows sorted ascending by probability (most anomalous first)."""
    if not fields:
        raise MLError("no fields selected")
    for name in fields:
        table.col_index(name)
    if not table.rows:
        return []
    n = len(table.rows)
    freq: dict[str, dict[str, int]] = {}
    for name in fields:
        counts: dict[str, int] = {}
        for value in table.column(name):
            key = cell_text(value)
            counts[key] = counts.get(key, 0) + 1
        freq[name] = counts

    probs: list[float] = []
    causes: list[str] = []
    for row_idx in range(n):
        probability = 1.0
        cause, cause_p = "", 2.0
        for name in fields:
            value = cell_text(table.rows[row_idx][table.col_index(name)])
            p = freq[name][value] / n
            probability *= p
            if p < cause_p:
                cause, cause_p = name, p
        probs.append(probability)
        causes.append(cause)

    cutoff = threshold * statistics.median(probs)
    rows = []
    for i in range(n):
        flagged = probs[i] < cutoff
        rows.append(AnomalyRow(
            cells=list(table.rows[i]),
            row_index=i,
            probability=probs[i],
            probable_cause=causes[i] if flagged else "",
            is_outlier=1 if flagged else 0,
        ))
    rows.sort(key=lambda r: r.probability)  # stable: original order breaks ties
    return rows
