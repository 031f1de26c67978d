/** Pure view-model builders.
 *
 * Everything shown on screen comes straight out of an API payload; these
 * functions only select, order and stringify. No metric is recomputed here.
 */

import type {
  Cell,
  Finding,
  PanelPayload,
  RenderPayload,
  SearchResponse,
} from "./types.js";

export const QUADRANT_ORDER = ["errors", "performance", "load", "security"] as const;

export function formatCell(value: Cell): string {
  if (value === null || value === undefined) return "";
  return String(value);
}

/** Microsecond epoch timestamps render as UTC ISO strings in _time columns. */
export function formatTime(us: number): string {
  const date = new Date(us / 1000);
  return date.toISOString().replace(".000Z", "Z");
}

export interface ResultsView {
  kind: "results";
  query: string;
  columns: string[];
  rows: string[][];
  rowCount: number;
  density: string | null;
  totalSeconds: number | null;
}

export interface InlineErrorView {
  kind: "error";
  query: string;
  message: string;
  offset: number;
  expected: string[];
  /** The submitted text with a caret line pointing at the failing offset. */
  queryLine: string;
  caretLine: string;
}

export type SearchView = ResultsView | InlineErrorView;

export function buildResultsView(query: string, response: SearchResponse): ResultsView {
  const timeColumns = new Set<number>();
  response.columns.forEach((name, i) => {
    if (name === "_time") timeColumns.add(i);
  });
  const rows = response.rows.map((row) =>
    row.map((cell, i) =>
      timeColumns.has(i) && typeof cell === "number" ? formatTime(cell) : formatCell(cell),
    ),
  );
  return {
    kind: "results",
    query,
    columns: [...response.columns],
    rows,
    rowCount: response.rows.length,
    density: response.density ?? response.profile?.density ?? null,
    totalSeconds: response.profile?.total_seconds ?? null,
  };
}

export function buildErrorView(
  query: string,
  message: string,
  offset: number,
  expected: string[],
): InlineErrorView {
  const caret = offset >= 1 ? offset - 1 : 0;
  return {
    kind: "error",
    query,
    message,
    offset,
    expected: [...expected],
    queryLine: query,
    caretLine: " ".repeat(Math.min(caret, query.length)) + "^",
  };
}

export interface QuadrantView {
  quadrant: string;
  title: string;
  viz: string;
  query: string;
  drilldown: string;
  columns: string[];
  rows: string[][];
  error: string | null;
}

export interface DashboardView {
  id: string;
  title: string;
  kpiScore: number;
  /** 0..100, drives the gauge arc directly. */
  gaugePercent: number;
  kpiQuadrants: { name: string; raw: number; penalty: number }[];
  quadrants: QuadrantView[];
}

function panelView(panel: PanelPayload): QuadrantView {
  return {
    quadrant: panel.quadrant,
    title: panel.title,
    viz: panel.viz,
    query: panel.query,
    drilldown: panel.drilldown_query ?? panel.query,
    columns: panel.columns ? [...panel.columns] : [],
    rows: (panel.rows ?? []).map((row) => row.map(formatCell)),
    error: panel.error ?? null,
  };
}

export function buildDashboardView(payload: RenderPayload): DashboardView {
  const byQuadrant = new Map<string, PanelPayload[]>();
  for (const panel of payload.panels) {
    const list = byQuadrant.get(panel.quadrant) ?? [];
    list.push(panel);
    byQuadrant.set(panel.quadrant, list);
  }
  const quadrants: QuadrantView[] = [];
  for (const name of QUADRANT_ORDER) {
    for (const panel of byQuadrant.get(name) ?? []) {
      quadrants.push(panelView(panel));
    }
  }
  // Panels outside the four known quadrants still render, at the end.
  for (const [name, panels] of byQuadrant) {
    if (!(QUADRANT_ORDER as readonly string[]).includes(name)) {
      quadrants.push(...panels.map(panelView));
    }
  }
  return {
    id: payload.id,
    title: payload.title,
    kpiScore: payload.kpi.score,
    gaugePercent: Math.max(0, Math.min(100, payload.kpi.score)),
    kpiQuadrants: QUADRANT_ORDER.map((name) => ({
      name,
      raw: payload.kpi.quadrants[name]?.raw ?? 0,
      penalty: payload.kpi.quadrants[name]?.penalty ?? 0,
    })),
    quadrants,
  };
}

export type VizModel =
  | { kind: "single"; label: string; value: string }
  | { kind: "bar"; bars: { label: string; value: string; percent: number }[] }
  | {
      kind: "pie";
      slices: { label: string; value: string; startDeg: number; endDeg: number }[];
    }
  | { kind: "timechart"; points: { label: string; value: string; y: number }[] }
  | { kind: "table" };

function lastNumericColumn(columns: string[], rows: string[][]): number {
  for (let col = columns.length - 1; col >= 0; col--) {
    if (rows.some((r) => r[col] !== "" && !Number.isNaN(Number(r[col])))) return col;
  }
  return columns.length - 1;
}

/** Shape a panel's rows for its declared viz kind.
 *
 * Displayed values stay verbatim API cells; only layout geometry (bar
 * widths, pie angles, chart heights) is derived from them.
 */
export function buildVizModel(view: QuadrantView): VizModel {
  const { columns, rows, viz } = view;
  if (rows.length === 0 || columns.length === 0) return { kind: "table" };
  const valueCol = lastNumericColumn(columns, rows);
  const labelCol = 0;
  const numbers = rows.map((r) => Number(r[valueCol]) || 0);
  if (viz === "single") {
    return { kind: "single", label: columns[valueCol], value: rows[0][valueCol] };
  }
  if (viz === "bar") {
    const max = Math.max(...numbers, 1);
    return {
      kind: "bar",
      bars: rows.map((r, i) => ({
        label: columns.length > 1 ? r[labelCol] : columns[valueCol],
        value: r[valueCol],
        percent: (100 * numbers[i]) / max,
      })),
    };
  }
  if (viz === "pie") {
    const total = numbers.reduce((a, b) => a + b, 0) || 1;
    let angle = 0;
    return {
      kind: "pie",
      slices: rows.map((r, i) => {
        const startDeg = angle;
        angle += (360 * numbers[i]) / total;
        return { label: r[labelCol], value: r[valueCol], startDeg, endDeg: angle };
      }),
    };
  }
  if (viz === "timechart") {
    const max = Math.max(...numbers, 1);
    return {
      kind: "timechart",
      points: rows.map((r, i) => ({
        label: r[labelCol],
        value: r[valueCol],
        y: numbers[i] / max,
      })),
    };
  }
  return { kind: "table" };
}

export interface FindingsFilter {
  rule?: string;
  severity?: string;
}

export interface FindingRow {
  rule: string;
  severity: string;
  eventId: number;
  excerpt: string;
  detectedAt: string;
  uri: string;
  /** Query the UI submits when the row is clicked. */
  drilldownQuery: string;
}

export interface FindingsView {
  rows: FindingRow[];
  total: number;
  shown: number;
  rules: string[];
  severities: string[];
  emptyMessage: string | null;
}

const SEVERITY_RANK: Record<string, number> = { high: 0, medium: 1, low: 2 };

export function buildFindingsView(
  findings: Finding[],
  filter: FindingsFilter = {},
  sortBy: "severity" | "time" | "rule" = "severity",
): FindingsView {
  let rows = findings.filter(
    (f) =>
      (!filter.rule || f.rule === filter.rule) &&
      (!filter.severity || f.severity === filter.severity),
  );
  const sorters: Record<string, (a: Finding, b: Finding) => number> = {
    severity: (a, b) =>
      (SEVERITY_RANK[a.severity] ?? 9) - (SEVERITY_RANK[b.severity] ?? 9) ||
      a.event_id - b.event_id,
    time: (a, b) => a.detected_at - b.detected_at || a.event_id - b.event_id,
    rule: (a, b) => a.rule.localeCompare(b.rule) || a.event_id - b.event_id,
  };
  rows = [...rows].sort(sorters[sortBy]);
  return {
    rows: rows.map((f) => ({
      rule: f.rule,
      severity: f.severity,
      eventId: f.event_id,
      excerpt: f.excerpt,
      detectedAt: formatTime(f.detected_at),
      uri: f.uri,
      drilldownQuery: `index=findings event_id=${f.event_id}`,
    })),
    total: findings.length,
    shown: rows.length,
    rules: [...new Set(findings.map((f) => f.rule))].sort(),
    severities: [...new Set(findings.map((f) => f.severity))].sort(),
    emptyMessage: findings.length === 0 ? "No findings recorded." : null,
  };
}
