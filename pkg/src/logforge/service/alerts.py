"""Scheduled alerts over saved searches, with dedup inside one interval."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

from ..query.executor import compare, to_number
from .dashboards import resolve_panel_query

log = logging.getLogger(__name__)

COMPARATORS = (">", ">=", "<", "<=", "=", "!=")


class AlertError(Exception):
    pass


@dataclass
class AlertDef:
    id: str
    search: str  # saved-search name or inline query text
    column: str
    comparator: str
    threshold: float
    interval_s: int = 300
    last_fired: float = 0.0

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise AlertError(f"alert {self.id}: bad comparator {self.comparator!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id, "search": self.search, "column": self.column,
            "comparator": self.comparator, "threshold": self.threshold,
            "interval_s": self.interval_s, "last_fired": self.last_fired,
        }


class AlertStore:
    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)
        self.defs_path = self.state_dir / "alerts.json"
        self.log_path = self.state_dir / "alerts.log"
        self.defs: dict[str, AlertDef] = {}
        if self.defs_path.exists():
            for entry in json.loads(self.defs_path.read_text()):
                self.defs[entry["id"]] = AlertDef(**entry)

    def ensure_default(self) -> None:
        if not self.defs:
            from ..engine import _data_file

            with _data_file("default_alerts.json").open("rb") as fh:
                for entry in json.load(fh):
                    self.defs[entry["id"]] = AlertDef(**entry)
            self.save()

    def add(self, alert: AlertDef) -> None:
        self.defs[alert.id] = alert
        self.save()

    def save(self) -> None:
        self.defs_path.write_text(
            json.dumps([a.to_dict() for a in self.defs.values()], indent=2))

    def append_log(self, record: dict) -> None:
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")


def run_alerts(engine, store: AlertStore, now: float | None = None) -> list[dict]:
    """Evaluate due alerts; fire at most once per schedule interval."""
    now = time.time() if now is None else now
    fired = []
    saved = engine.saved_searches()
    for alert in store.defs.values():
        if now - alert.last_fired < alert.interval_s:
            continue  # dedup within one interval
        try:
            text = resolve_panel_query(alert.search, saved)
            table, _ = engine.search(text)
        except Exception as exc:
            log.warning("alert %s failed: %s", alert.id, exc)
            continue
        idx = table.col(alert.column)
        if idx is None or not table.rows:
            continue
        value = to_number(table.rows[0][idx])
        if value is None:
            continue
        if compare(alert.comparator, value, alert.threshold):
            record = {
                "alert": alert.id,
                "fired_at": now,
                "value": value,
                "comparator": alert.comparator,
                "threshold": alert.threshold,
                "query": text,
            }
            store.append_log(record)
            alert.last_fired = now
            fired.append(record)
    if fired:
        store.save()
    return fired
