"""HTTP API over the engine: search, dashboards, alerts, findings, health."""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..query.parser import ParseError
from .alerts import AlertDef, AlertError, AlertStore, run_alerts
from .config import Config
from .dashboards import (
    Dashboard,
    DashboardError,
    DashboardStore,
    render_dashboard,
    validate_dashboard,
)


class SearchRequest(BaseModel):
    query: str
    earliest: int | None = None
    latest: int | None = None
    profile: bool = False


class AlertRequest(BaseModel):
    id: str
    search: str
    column: str
    comparator: str
    threshold: float
    interval_s: int = 300


def create_app(engine, config: Config | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    config = config or Config()
    app = FastAPI(title="logforge", version="0.1.0")
    dashboards = DashboardStore(engine.state_dir)
    dashboards.ensure_default()
    alerts = AlertStore(engine.state_dir)
    alerts.ensure_default()

    @app.post("/api/search")
    def api_search(req: SearchRequest):
        try:
            table, profile = engine.search(req.query, req.earliest, req.latest)
        except ParseError as exc:
            return JSONResponse(status_code=400, content={
                "error": {
                    "message": str(exc),
                    "offset": exc.offset,
                    "expected": exc.expected,
                },
            })
        body = {
            "columns": table.columns,
            "rows": table.rows,
            "provenance": table.provenance,
        }
        if req.profile:
            body["profile"] = profile.to_dict()
            body["density"] = profile.density
        return body

    @app.get("/api/dashboards")
    def api_dashboards():
        out = []
        for dashboard_id in dashboards.list_ids():
            d = dashboards.get(dashboard_id)
            out.append({"id": d.id, "title": d.title, "panels": len(d.panels)})
        return {"dashboards": out}

    @app.post("/api/dashboards")
    def api_save_dashboard(body: dict):
        try:
            dashboard = Dashboard.from_dict(body)
            validate_dashboard(dashboard, engine.saved_searches())
        except (KeyError, TypeError, DashboardError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        dashboards.save(dashboard)
        return {"saved": dashboard.id}

    @app.get("/api/dashboards/{dashboard_id}/render")
    def api_render(dashboard_id: str, earliest: int | None = None,
                   latest: int | None = None):
        dashboard = dashboards.get(dashboard_id)
        if dashboard is None:
            raise HTTPException(status_code=404, detail=f"no dashboard {dashboard_id!r}")
        return render_dashboard(dashboard, engine, config.kpi, earliest, latest)

    @app.get("/api/alerts")
    def api_alerts():
        return {"alerts": [a.to_dict() for a in alerts.defs.values()]}

    @app.post("/api/alerts")
    def api_add_alert(req: AlertRequest):
        try:
            alerts.add(AlertDef(**req.model_dump()))
        except AlertError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"saved": req.id}

    @app.post("/api/alerts/run")
    def api_run_alerts():
        return {"fired": run_alerts(engine, alerts)}

    @app.get("/api/findings")
    def api_findings(rule: str | None = None, severity: str | None = None):
        path = engine.state_dir / "findings.jsonl"
        findings = []
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                if rule and entry.get("rule") != rule:
                    continue
                if severity and entry.get("severity") != severity:
                    continue
                findings.append(entry)
        return {"findings": findings, "total": len(findings)}

    @app.get("/api/health")
    def api_health():
        return {
            "status": "ok",
            "indexes": {name: handle.event_count
                        for name, handle in engine.indexes.items()},
        }

    ui_path = Path(ui_dir) if ui_dir else None
    if ui_path and ui_path.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app
