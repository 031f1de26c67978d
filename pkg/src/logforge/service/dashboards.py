"""Dashboard persistence and rendering: four quadrants plus the KPI."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ..query.parser import ParseError, parse
from .config import QUADRANTS, KpiSpec
from .kpi import compute_kpi

log = logging.getLogger(__name__)

VIZ_KINDS = ("single", "bar", "pie", "timechart", "table")


class DashboardError(Exception):
    pass


@dataclass
class Panel:
    title: str
    query: str  # saved-search name (optionally "saved:<name>") or inline text
    viz: str = "table"
    quadrant: str = "errors"

    def __post_init__(self):
        if self.viz not in VIZ_KINDS:
            raise DashboardError(f"unknown viz {self.viz!r}")
        if self.quadrant not in QUADRANTS:
            raise DashboardError(f"unknown quadrant {self.quadrant!r}")


@dataclass
class Dashboard:
    id: str
    title: str
    panels: list[Panel] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "panels": [
                {"title": p.title, "query": p.query, "viz": p.viz, "quadrant": p.quadrant}
                for p in self.panels
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Dashboard":
        return cls(
            id=data["id"],
            title=data.get("title", data["id"]),
            panels=[Panel(**p) for p in data.get("panels", [])],
        )


class DashboardStore:
    def __init__(self, state_dir: str | Path):
        self.dir = Path(state_dir) / "dashboards"
        self.dir.mkdir(parents=True, exist_ok=True)

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.dir.glob("*.json"))

    def get(self, dashboard_id: str) -> Dashboard | None:
        path = self.dir / f"{dashboard_id}.json"
        if not path.exists():
            return None
        return Dashboard.from_dict(json.loads(path.read_text()))

    def save(self, dashboard: Dashboard) -> None:
        path = self.dir / f"{dashboard.id}.json"
        path.write_text(json.dumps(dashboard.to_dict(), indent=2))

    def ensure_default(self) -> None:
        if not self.list_ids():
            from ..engine import _data_file

            with _data_file("default_dashboard.json").open("rb") as fh:
                self.save(Dashboard.from_dict(json.load(fh)))


def resolve_panel_query(panel_query: str, saved: dict[str, dict]) -> str:
    """A panel query is either a saved-search reference or inline text."""
    name = panel_query[6:] if panel_query.startswith("saved:") else panel_query
    if name in saved:
        return saved[name]["query"]
    if panel_query.startswith("saved:"):
        raise DashboardError(f"no saved search named {name!r}")
    return panel_query


def validate_dashboard(dashboard: Dashboard, saved: dict[str, dict]) -> None:
    """Every panel query must resolve and parse; raised errors name the panel."""
    for panel in dashboard.panels:
        try:
            parse(resolve_panel_query(panel.query, saved))
        except (DashboardError, ParseError) as exc:
            raise DashboardError(f"panel {panel.title!r}: {exc}") from exc


def drilldown_text(query_text: str) -> str:
    """The search-only prefix of a query: what the UI runs when drilling in."""
    return query_text.split("|", 1)[0].strip()


def render_dashboard(dashboard: Dashboard, engine, kpi_spec: KpiSpec,
                     earliest: int | None = None, latest: int | None = None) -> dict:
    """Execute every panel; a failing panel reports its error without
    blanking the others."""
    saved = engine.saved_searches()
    panels = []
    for panel in dashboard.panels:
        entry = {
            "title": panel.title,
            "viz": panel.viz,
            "quadrant": panel.quadrant,
            "query": panel.query,
        }
        try:
            text = resolve_panel_query(panel.query, saved)
            entry["query"] = text
            entry["drilldown_query"] = drilldown_text(text)
            parse(text)
            table, profile = engine.search(text, earliest, latest)
            entry["columns"] = table.columns
            entry["rows"] = table.rows
            entry["provenance"] = table.provenance
            entry["density"] = profile.density
        except (DashboardError, ParseError) as exc:
            entry["error"] = str(exc)
        except Exception as exc:  # panel isolation: never take down the render
            log.exception("panel %r failed", panel.title)
            entry["error"] = f"{type(exc).__name__}: {exc}"
        panels.append(entry)
    return {
        "id": dashboard.id,
        "title": dashboard.title,
        "kpi": compute_kpi(engine, kpi_spec, earliest, latest),
        "panels": panels,
    }
