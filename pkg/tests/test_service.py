import json

import pytest
from fastapi.testclient import TestClient

from logforge import security
from logforge.engine import Engine
from logforge.ingest import Event, extract_fields, ingest_file
from logforge.service.alerts import AlertDef, AlertStore, run_alerts
from logforge.service.api import create_app
from logforge.service.config import Config, ConfigError, KpiSpec
from logforge.service.dashboards import (
    Dashboard,
    DashboardStore,
    Panel,
    drilldown_text,
    render_dashboard,
)
from logforge.service.generator import GenProfile, generate_corpus
from logforge.service.kpi import compute_kpi, penalty


class TestGenerator:
    def test_same_seed_byte_identical(self, tmp_path):
        a = generate_corpus(GenProfile(seed=9, events=400, attack_rate=0.01), tmp_path / "a")
        b = generate_corpus(GenProfile(seed=9, events=400, attack_rate=0.01), tmp_path / "b")
        assert a.applog.read_bytes() == b.applog.read_bytes()
        assert a.accesslog.read_bytes() == b.accesslog.read_bytes()
        assert a.lookup.read_bytes() == b.lookup.read_bytes()

    def test_different_seed_differs(self, tmp_path):
        a = generate_corpus(GenProfile(seed=1, events=200), tmp_path / "a")
        b = generate_corpus(GenProfile(seed=2, events=200), tmp_path / "b")
        assert a.applog.read_bytes() != b.applog.read_bytes()

    def test_zero_attack_rate_empty_manifest(self, tmp_path):
        corpus = generate_corpus(GenProfile(seed=3, events=300, attack_rate=0.0),
                                 tmp_path / "c")
        assert corpus.manifest["attacks"] == []

    def test_ten_thousand_events_promille_attacks(self, tmp_path):
        corpus = generate_corpus(GenProfile(seed=4, events=10_000, attack_rate=0.001),
                                 tmp_path / "c")
        assert len(corpus.manifest["attacks"]) == 10

    def test_zero_events(self, tmp_path):
        corpus = generate_corpus(GenProfile(seed=5, events=0), tmp_path / "c")
        assert corpus.applog.read_text() == ""
        assert corpus.accesslog.read_text() == ""
        assert corpus.manifest["attacks"] == []

    def test_attack_lines_land_where_manifest_says(self, tmp_path):
        corpus = generate_corpus(GenProfile(seed=6, events=500, attack_rate=0.02),
                                 tmp_path / "c")
        lines = corpus.accesslog.read_text().splitlines()
        for entry in corpus.manifest["attacks"]:
            assert entry["uri"] in lines[entry["line"] - 1]


@pytest.fixture(scope="module")
def service_env(tmp_path_factory):
    root = tmp_path_factory.mktemp("service")
    corpus = generate_corpus(GenProfile(seed=11, events=600, attack_rate=0.02), root / "c")
    engine = Engine(root / "data")
    engine.ingest_path(corpus.applog, sourcetype="applog", host="app01")
    engine.ingest_path(corpus.accesslog, sourcetype="accesslog",
                       host="www.example.com")
    events = []
    ident = 1
    for ev in ingest_file(corpus.accesslog, engine.rules, "www.example.com",
                          "accesslog"):
        ev.id = ident
        ident += 1
        extract_fields(ev, engine.rules.rules_for("accesslog"))
        events.append(ev)
    findings, _ = security.run_pack(events, security.builtin_pack(),
                                    security.RefererLookup.from_csv(corpus.lookup))
    engine.index("findings").index_events(security.findings_to_events(findings))
    security.write_findings_jsonl(findings, engine.state_dir / "findings.jsonl")
    client = TestClient(create_app(engine, Config()))
    return engine, corpus, findings, client


class TestSearchApi:
    def test_error_count(self, service_env):
        engine, corpus, _, client = service_env
        r = client.post("/api/search",
                        json={"query": "sourcetype=applog ERROR | stats count"})
        assert r.status_code == 200
        assert r.json()["rows"] == [[corpus.manifest["applog"]["errors"]]]

    def test_malformed_query_400_with_offset(self, service_env):
        _, _, _, client = service_env
        r = client.post("/api/search", json={"query": "a | | b"})
        assert r.status_code == 400
        body = r.json()["error"]
        assert body["offset"] == 5
        assert body["expected"]

    def test_profile_flag_adds_density(self, service_env):
        _, _, _, client = service_env
        r = client.post("/api/search", json={"query": "ERROR | stats count",
                                             "profile": True})
        assert "density" in r.json()
        assert "components" in r.json()["profile"]

    def test_time_range_passthrough(self, service_env):
        _, _, _, client = service_env
        r = client.post("/api/search", json={
            "query": "sourcetype=applog | stats count", "earliest": 1, "latest": 2})
        assert r.json()["rows"] == [[0]]


class TestDashboardApi:
    def test_render_populates_four_quadrants(self, service_env):
        _, _, _, client = service_env
        body = client.get("/api/dashboards/main/render").json()
        quadrants = {p["quadrant"] for p in body["panels"]}
        assert quadrants == {"errors", "performance", "load", "security"}
        for panel in body["panels"]:
            assert "error" not in panel, panel
            assert panel["rows"], f"panel {panel['title']} came back empty"

    def test_unknown_dashboard_404(self, service_env):
        _, _, _, client = service_env
        assert client.get("/api/dashboards/ghost/render").status_code == 404

    def test_panel_carries_drilldown_query(self, service_env):
        _, _, _, client = service_env
        body = client.get("/api/dashboards/main/render").json()
        for panel in body["panels"]:
            assert panel["drilldown_query"] == drilldown_text(panel["query"])

    def test_drilldown_returns_superset_of_provenance(self, service_env):
        engine, _, _, client = service_env
        body = client.get("/api/dashboards/main/render").json()
        for panel in body["panels"]:
            raw_table, _ = engine.search(panel["drilldown_query"])
            available = set(raw_table.provenance or [])
            for prov in (panel.get("provenance") or []):
                if prov is not None:
                    assert prov in available

    def test_create_and_render_custom_dashboard(self, service_env):
        _, _, _, client = service_env
        doc = {"id": "custom", "title": "Custom", "panels": [
            {"title": "All", "query": "sourcetype=applog | stats count",
             "viz": "single", "quadrant": "load"}]}
        assert client.post("/api/dashboards", json=doc).status_code == 200
        body = client.get("/api/dashboards/custom/render").json()
        assert body["panels"][0]["rows"] == [[600]]

    def test_missing_saved_search_isolated_to_its_panel(self, service_env):
        # A panel whose saved search disappeared after save still renders the
        # other panels; the store is written directly to simulate that state.
        engine, _, _, client = service_env
        store = DashboardStore(engine.state_dir)
        store.save(Dashboard(id="broken", title="Broken", panels=[
            Panel(title="Bad", query="saved:no_such_saved_search",
                  viz="table", quadrant="errors"),
            Panel(title="Good", query="sourcetype=applog | stats count",
                  viz="single", quadrant="load")]))
        body = client.get("/api/dashboards/broken/render").json()
        bad, good = body["panels"]
        assert "error" in bad
        assert good["rows"] == [[600]]

    def test_unparseable_panel_query_rejected_at_save(self, service_env):
        _, _, _, client = service_env
        doc = {"id": "nope", "title": "Nope", "panels": [
            {"title": "Bad", "query": "a | | b", "viz": "table",
             "quadrant": "errors"}]}
        response = client.post("/api/dashboards", json=doc)
        assert response.status_code == 400
        assert "Bad" in response.json()["detail"]

    def test_list_dashboards(self, service_env):
        _, _, _, client = service_env
        ids = {d["id"] for d in client.get("/api/dashboards").json()["dashboards"]}
        assert "main" in ids


class TestFindingsAndHealth:
    def test_findings_endpoint_counts(self, service_env):
        _, corpus, findings, client = service_env
        body = client.get("/api/findings").json()
        assert body["total"] == len(findings)

    def test_findings_filters(self, service_env):
        _, _, findings, client = service_env
        high = client.get("/api/findings", params={"severity": "high"}).json()
        assert all(f["severity"] == "high" for f in high["findings"])
        xss = client.get("/api/findings", params={"rule": "xss"}).json()
        assert all(f["rule"] == "xss" for f in xss["findings"])

    def test_health_reports_indexes(self, service_env):
        engine, _, _, client = service_env
        body = client.get("/api/health").json()
        assert body["status"] == "ok"
        assert body["indexes"]["main"] == 1200


class TestKpi:
    def test_kpi_100_on_clean_corpus(self, tmp_path, benign_corpus10k):
        engine = Engine(tmp_path / "data")
        engine.ingest_path(benign_corpus10k.applog, sourcetype="applog", host="a")
        kpi = compute_kpi(engine, KpiSpec())
        assert kpi["score"] == 100.0
        assert all(q["penalty"] == 0.0 for q in kpi["quadrants"].values())

    def test_security_panel_zero_on_benign(self, tmp_path, benign_corpus10k):
        engine = Engine(tmp_path / "data")
        engine.ingest_path(benign_corpus10k.applog, sourcetype="applog", host="a")
        store = DashboardStore(engine.state_dir)
        store.ensure_default()
        body = render_dashboard(store.get("main"), engine, KpiSpec())
        security_panel = [p for p in body["panels"] if p["quadrant"] == "security"][0]
        assert security_panel["rows"] in ([], [[0]])
        assert body["kpi"]["score"] == 100.0

    def test_errors_never_increase_kpi(self, tmp_path):
        engine = Engine(tmp_path / "data")
        idx = engine.index()
        base_line = "[2018-01-17 15:30:00,000001]INFO (D ) ok in 10 ms"
        for i in range(200):
            idx.index_event(Event(raw=base_line, timestamp=i + 1, host="h",
                                  source="s", sourcetype="applog"))
        spec = KpiSpec()
        before = compute_kpi(engine, spec)["score"]
        for i in range(20):
            idx.index_event(Event(raw="[2018-01-17 15:31:00,000001]ERROR (D ) boom",
                                  timestamp=10_000 + i, host="h", source="s",
                                  sourcetype="applog"))
        after = compute_kpi(engine, spec)["score"]
        assert after <= before

    def test_findings_never_increase_kpi(self, tmp_path):
        engine = Engine(tmp_path / "data")
        engine.index().index_event(Event(
            raw="[2018-01-17 15:30:00,000001]INFO (D ) ok", timestamp=1,
            host="h", source="s", sourcetype="applog"))
        spec = KpiSpec()
        before = compute_kpi(engine, spec)["score"]
        engine.index("findings").index_event(Event(
            raw="finding rule=xss severity=high event_id=1", timestamp=1,
            host="d", source="s", sourcetype="findings"))
        after = compute_kpi(engine, spec)["score"]
        assert after <= before

    def test_penalty_shape(self):
        assert penalty(0, 0, 50) == 0.0
        assert penalty(25, 0, 50) == 50.0
        assert penalty(500, 0, 50) == 100.0
        assert penalty(1000, 1500, 5000) == 0.0


class TestAlerts:
    def seeded_engine(self, tmp_path, findings_count):
        engine = Engine(tmp_path / "data")
        for i in range(findings_count):
            engine.index("findings").index_event(Event(
                raw=f"finding rule=xss severity=high event_id={i}",
                timestamp=i + 1, host="d", source="s", sourcetype="findings"))
        return engine

    def test_fires_once_over_threshold(self, tmp_path):
        engine = self.seeded_engine(tmp_path, 7)
        store = AlertStore(engine.state_dir)
        store.add(AlertDef("many-findings", "index=findings * | stats count",
                           "count", ">", 5, interval_s=300))
        fired = run_alerts(engine, store, now=1000.0)
        assert [f["alert"] for f in fired] == ["many-findings"]
        assert (engine.state_dir / "alerts.log").exists()

    def test_condition_on_empty_result_does_not_fire(self, tmp_path):
        engine = self.seeded_engine(tmp_path, 0)
        store = AlertStore(engine.state_dir)
        store.add(AlertDef("groups", "index=findings * | stats count by rule",
                           "count", ">", 0, interval_s=300))
        assert run_alerts(engine, store, now=1000.0) == []

    def test_second_run_inside_interval_deduped(self, tmp_path):
        engine = self.seeded_engine(tmp_path, 7)
        store = AlertStore(engine.state_dir)
        store.add(AlertDef("many-findings", "index=findings * | stats count",
                           "count", ">", 5, interval_s=300))
        assert len(run_alerts(engine, store, now=1000.0)) == 1
        assert run_alerts(engine, store, now=1100.0) == []
        assert len(run_alerts(engine, store, now=1400.0)) == 1

    def test_alert_api_round_trip(self, service_env):
        _, _, _, client = service_env
        r = client.post("/api/alerts", json={
            "id": "spike", "search": "sourcetype=applog ERROR | stats count",
            "column": "count", "comparator": ">", "threshold": 1, "interval_s": 60})
        assert r.status_code == 200
        names = {a["id"] for a in client.get("/api/alerts").json()["alerts"]}
        assert {"spike", "high-findings"} <= names
        fired = client.post("/api/alerts/run").json()["fired"]
        assert {f["alert"] for f in fired} >= {"spike"}


class TestConfig:
    def test_load_toml(self, tmp_path):
        path = tmp_path / "logforge.toml"
        path.write_text(
            'data_dir = "/tmp/x"\nport = 9000\n\n[roll]\nmax_bytes = 1024\n\n'
            '[kpi.weights]\nerrors = 0.4\nperformance = 0.2\nload = 0.2\nsecurity = 0.2\n')
        config = Config.load(path)
        assert config.port == 9000
        assert config.roll.max_bytes == 1024
        assert config.kpi.weights["errors"] == 0.4

    def test_load_json(self, tmp_path):
        path = tmp_path / "logforge.json"
        path.write_text(json.dumps({"port": 9001}))
        assert Config.load(path).port == 9001

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            KpiSpec(weights={"errors": 0.5, "performance": 0.5,
                             "load": 0.5, "security": 0.5})

    def test_bad_quadrant_rejected(self):
        with pytest.raises(ConfigError):
            KpiSpec(weights={"errors": 1.0})


class TestDashboardValidation:
    def test_bad_viz_rejected(self):
        with pytest.raises(Exception):
            Panel(title="x", query="*", viz="hologram", quadrant="errors")

    def test_bad_quadrant_rejected(self):
        with pytest.raises(Exception):
            Panel(title="x", query="*", viz="table", quadrant="weather")

    def test_store_round_trip(self, tmp_path):
        store = DashboardStore(tmp_path)
        d = Dashboard(id="t", title="T", panels=[
            Panel(title="p", query="* | stats count", viz="single", quadrant="load")])
        store.save(d)
        back = store.get("t")
        assert back.title == "T" and back.panels[0].query == "* | stats count"
