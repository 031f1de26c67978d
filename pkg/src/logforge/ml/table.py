"""Tabular data container for the analytics operations, with CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path


class MLError(Exception):
    pass


def cell_number(value):
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            try:
                return float(value)
            except ValueError:
                return None
    return None


def cell_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


@dataclass
class DataTable:
    columns: list[str]
    rows: list[list]
    provenance: list[int | None] | None = field(default=None)

    def col_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise MLError(f"no column named {name!r}") from None

    def column(self, name: str) -> list:
        idx = self.col_index(name)
        return [row[idx] for row in self.rows]

    def subset(self, row_indices) -> "DataTable":
        return DataTable(list(self.columns), [self.rows[i] for i in row_indices])

    def with_column(self, name: str, values: list) -> "DataTable":
        if len(values) != len(self.rows):
            raise MLError("column length does not match row count")
        if name in self.columns:
            idx = self.columns.index(name)
            rows = [list(r) for r in self.rows]
            for row, v in zip(rows, values):
                row[idx] = v
            return DataTable(list(self.columns), rows, self.provenance)
        rows = [list(r) + [v] for r, v in zip(self.rows, values)]
        return DataTable(list(self.columns) + [name], rows, self.provenance)

    @classmethod
    def from_csv(cls, path: str | Path) -> "DataTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MLError(f"{path} is empty; a header row is required") from None
            rows = [list(row) + [""] * (len(header) - len(row)) for row in reader]
        return cls(columns=header, rows=rows)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([cell_text(v) for v in row])
