from .alerts import AlertDef, AlertStore, run_alerts
from .config import Config, ConfigError, KpiSpec
from .dashboards import Dashboard, DashboardStore, Panel, render_dashboard
from .generator import ATTACK_RULES, Corpus, GenProfile, generate_corpus
from .kpi import compute_kpi, quadrant_metrics

__all__ = [
    "ATTACK_RULES", "AlertDef", "AlertStore", "Config", "ConfigError",
    "Corpus", "Dashboard", "DashboardStore", "GenProfile", "KpiSpec", "Panel",
    "compute_kpi", "generate_corpus", "quadrant_metrics", "render_dashboard",
    "run_alerts",
]
