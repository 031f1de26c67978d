"""Feature encoding: one-hot for categoricals (with a reserved unseen column),
pass-through or standardized columns for numerics."""

from __future__ import annotations

import numpy as np

from .table import DataTable, MLError, cell_number, cell_text


class FieldEncoder:
    """Maps selected table fields into a dense numeric matrix.

    Categorical fields get one one-hot column per training value plus a
    reserved trailing column that unseen apply-time values route to. Numeric
    fields become a single column, optionally standardized with the training
    mean/std.
    """

    def __init__(self, fields: list[str], specs: list[dict], standardize: bool):
        self.fields = fields
        self.specs = specs
        self.standardize = standardize

    @classmethod
    def fit(cls, table: DataTable, fields: list[str], standardize: bool) -> "FieldEncoder":
        if not fields:
            raise MLError("no fields selected")
        specs = []
        for name in fields:
            values = table.column(name)
            numeric = [cell_number(v) for v in values]
            if values and all(n is not None for n in numeric):
                arr = np.asarray(numeric, dtype=float)
                std = float(arr.std())
                specs.append({
                    "kind": "numeric",
                    "mean": float(arr.mean()),
                    "std": std if std > 1e-12 else 1.0,
                })
            else:
                seen: list[str] = []
                lookup = {}
                for v in values:
                    text = cell_text(v)
                    if text not in lookup:
                        lookup[text] = len(seen)
                        seen.append(text)
                specs.append({"kind": "categorical", "values": seen})
        return cls(list(fields), specs, standardize)

    @property
    def width(self) -> int:
        total = 0
        for spec in self.specs:
            total += 1 if spec["kind"] == "numeric" else len(spec["values"]) + 1
        return total

    def feature_names(self) -> list[str]:
        names = []
        for name, spec in zip(self.fields, self.specs):
            if spec["kind"] == "numeric":
                names.append(name)
            else:
                names.extend(f"{name}={v}" for v in spec["values"])
                names.append(f"{name}=<unseen>")
        return names

    def transform(self, table: DataTable) -> np.ndarray:
        for name in self.fields:
            table.col_index(name)  # raises with the missing field's name
        n = len(table.rows)
        out = np.zeros((n, self.width))
        col = 0
        for name, spec in zip(self.fields, self.specs):
            values = table.column(name)
            if spec["kind"] == "numeric":
                for i, v in enumerate(values):
                    num = cell_number(v)
                    if num is None:
                        num = spec["mean"]  # unparseable numerics center to z=0
                    out[i, col] = (num - spec["mean"]) / spec["std"] if self.standardize else num
                col += 1
            else:
                width = len(spec["values"]) + 1
                lookup = {v: j for j, v in enumerate(spec["values"])}
                for i, v in enumerate(values):
                    j = lookup.get(cell_text(v), width - 1)
                    out[i, col + j] = 1.0
                col += width
        return out

    def to_dict(self) -> dict:
        return {"fields": self.fields, "specs": self.specs, "standardize": self.standardize}

    @classmethod
    def from_dict(cls, data: dict) -> "FieldEncoder":
        return cls(data["fields"], data["specs"], data["standardize"])
