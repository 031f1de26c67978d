"""The 0-100 health score synthesized from the four dashboard quadrants."""

from __future__ import annotations

import math

from .config import QUADRANTS, KpiSpec


def penalty(raw: float, budget: float, cap: float) -> float:
    if raw <= budget:
        return 0.0
    return min(100.0, 100.0 * (raw - budget) / (cap - budget))


def _first_number(table) -> float:
    for row in table.rows:
        for cell in row:
            if isinstance(cell, (int, float)):
                return float(cell)
    return 0.0


def quadrant_metrics(engine, earliest=None, latest=None,
                     app_sourcetype: str = "applog",
                     findings_index: str = "findings") -> dict:
    """Raw metric per quadrant, computed from the indexed corpus."""
    total_t, _ = engine.search(f"sourcetype={app_sourcetype} | stats count",
                               earliest, latest)
    total = _first_number(total_t)
    errors_t, _ = engine.search(f"sourcetype={app_sourcetype} ERROR | stats count",
                                earliest, latest)
    errors = _first_number(errors_t)
    errors_per_1k = 1000.0 * errors / total if total else 0.0

    ms_t, _ = engine.search(f"sourcetype={app_sourcetype} ms=* | table ms",
                            earliest, latest)
    values = sorted(float(r[0]) for r in ms_t.rows if r[0] is not None)
    p95 = values[max(math.ceil(0.95 * len(values)) - 1, 0)] if values else 0.0

    load_t, _ = engine.search(f"sourcetype={app_sourcetype} | timechart span=1m count",
                              earliest, latest)
    peak = max((float(r[1]) for r in load_t.rows), default=0.0)

    findings_t, _ = engine.search(f"index={findings_index} * | stats count",
                                  earliest, latest)
    findings = _first_number(findings_t)

    return {
        "errors": errors_per_1k,
        "performance": p95,
        "load": peak,
        "security": findings,
    }


def compute_kpi(engine, spec: KpiSpec, earliest=None, latest=None) -> dict:
    """KPI = 100 - sum of weighted quadrant penalties, clamped to [0, 100]."""
    raws = quadrant_metrics(engine, earliest, latest)
    quadrants = {}
    score = 100.0
    for q in QUADRANTS:
        p = penalty(raws[q], spec.budgets[q], spec.caps[q])
        quadrants[q] = {
            "raw": raws[q],
            "penalty": p,
            "weight": spec.weights[q],
        }
        score -= spec.weights[q] * p
    return {"score": max(0.0, min(100.0, score)), "quadrants": quadrants}
