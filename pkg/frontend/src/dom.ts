/** Thin DOM helpers: view models in, elements out. */

import { buildVizModel } from "./views.js";
import type {
  DashboardView,
  FindingsView,
  InlineErrorView,
  QuadrantView,
  ResultsView,
  VizModel,
} from "./views.js";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function table(columns: string[], rows: string[][]): HTMLTableElement {
  const root = el("table", "result-table");
  const head = root.createTHead().insertRow();
  for (const name of columns) {
    const cell = document.createElement("th");
    cell.textContent = name;
    head.appendChild(cell);
  }
  const body = root.createTBody();
  for (const row of rows) {
    const tr = body.insertRow();
    for (const value of row) {
      tr.insertCell().textContent = value;
    }
  }
  return root;
}

export function densityBadge(density: string | null): HTMLElement {
  const badge = el("span", "density-badge", density ?? "–");
  if (density) badge.classList.add(`density-${density.toLowerCase()}`);
  return badge;
}

export function resultsNode(view: ResultsView): HTMLElement {
  const root = el("div", "search-results");
  const meta = el("div", "results-meta");
  meta.appendChild(el("span", "row-count", `${view.rowCount} rows`));
  meta.appendChild(densityBadge(view.density));
  if (view.totalSeconds !== null) {
    meta.appendChild(el("span", "elapsed", `${view.totalSeconds.toFixed(3)}s`));
  }
  root.appendChild(meta);
  root.appendChild(table(view.columns, view.rows));
  return root;
}

export function errorNode(view: InlineErrorView): HTMLElement {
  const root = el("div", "search-error");
  root.appendChild(el("div", "error-message", `${view.message} (offset ${view.offset})`));
  const pre = el("pre", "error-context");
  pre.textContent = `${view.queryLine}\n${view.caretLine}`;
  root.appendChild(pre);
  if (view.expected.length) {
    root.appendChild(el("div", "error-expected", `expected: ${view.expected.join(", ")}`));
  }
  return root;
}

export function gaugeNode(score: number): HTMLElement {
  const root = el("div", "kpi-gauge");
  const fill = el("div", "kpi-gauge-fill");
  fill.style.width = `${Math.max(0, Math.min(100, score))}%`;
  root.appendChild(fill);
  root.appendChild(el("div", "kpi-score", score.toFixed(1)));
  return root;
}

function vizNode(view: QuadrantView, model: VizModel): HTMLElement {
  if (model.kind === "single") {
    const root = el("div", "viz-single");
    root.appendChild(el("div", "viz-single-value", model.value));
    root.appendChild(el("div", "viz-single-label", model.label));
    return root;
  }
  if (model.kind === "bar") {
    const root = el("div", "viz-bar");
    for (const bar of model.bars) {
      const row = el("div", "viz-bar-row");
      row.appendChild(el("span", "viz-bar-label", bar.label));
      const track = el("div", "viz-bar-track");
      const fill = el("div", "viz-bar-fill");
      fill.style.width = `${bar.percent}%`;
      track.appendChild(fill);
      row.appendChild(track);
      row.appendChild(el("span", "viz-bar-value", bar.value));
      root.appendChild(row);
    }
    return root;
  }
  if (model.kind === "pie") {
    const root = el("div", "viz-pie");
    const disc = el("div", "viz-pie-disc");
    const stops = model.slices
      .map((s, i) => `var(--pie-${i % 6}) ${s.startDeg}deg ${s.endDeg}deg`)
      .join(", ");
    disc.style.background = `conic-gradient(${stops})`;
    root.appendChild(disc);
    const legend = el("ul", "viz-pie-legend");
    model.slices.forEach((s, i) => {
      const item = el("li");
      const swatch = el("span", "swatch");
      swatch.style.background = `var(--pie-${i % 6})`;
      item.append(swatch, el("span", undefined, `${s.label} (${s.value})`));
      legend.appendChild(item);
    });
    root.appendChild(legend);
    return root;
  }
  if (model.kind === "timechart") {
    const root = el("div", "viz-timechart");
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", "0 0 100 32");
    svg.setAttribute("preserveAspectRatio", "none");
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    const n = Math.max(model.points.length - 1, 1);
    line.setAttribute(
      "points",
      model.points.map((p, i) => `${(100 * i) / n},${30 - 28 * p.y}`).join(" "),
    );
    line.setAttribute("class", "viz-line");
    svg.appendChild(line);
    root.appendChild(svg);
    root.appendChild(el("div", "viz-timechart-span",
      `${model.points[0].label} … ${model.points[model.points.length - 1].label}`));
    return root;
  }
  return table(view.columns, view.rows);
}

export function quadrantNode(
  view: QuadrantView,
  onDrilldown: (query: string) => void,
): HTMLElement {
  const root = el("section", `quadrant quadrant-${view.quadrant}`);
  const header = el("header");
  header.appendChild(el("h3", undefined, view.title));
  const drill = el("button", "drilldown", "explore");
  drill.addEventListener("click", () => onDrilldown(view.drilldown));
  header.appendChild(drill);
  root.appendChild(header);
  if (view.error) {
    root.appendChild(el("div", "panel-error", view.error));
  } else {
    root.appendChild(vizNode(view, buildVizModel(view)));
  }
  return root;
}

export function dashboardNode(
  view: DashboardView,
  onDrilldown: (query: string) => void,
): HTMLElement {
  const root = el("div", "dashboard");
  const top = el("div", "dashboard-top");
  top.appendChild(el("h2", undefined, view.title));
  top.appendChild(gaugeNode(view.kpiScore));
  root.appendChild(top);
  const grid = el("div", "quadrant-grid");
  for (const quadrant of view.quadrants) {
    grid.appendChild(quadrantNode(quadrant, onDrilldown));
  }
  root.appendChild(grid);
  return root;
}

export function findingsNode(
  view: FindingsView,
  onDrilldown: (query: string) => void,
): HTMLElement {
  const root = el("div", "findings");
  if (view.emptyMessage) {
    root.appendChild(el("div", "empty-state", view.emptyMessage));
    return root;
  }
  root.appendChild(el("div", "findings-meta", `${view.shown} of ${view.total} findings`));
  const grid = table(
    ["rule", "severity", "event", "detected", "excerpt"],
    view.rows.map((r) => [r.rule, r.severity, String(r.eventId), r.detectedAt, r.excerpt]),
  );
  const body = grid.tBodies[0];
  view.rows.forEach((row, i) => {
    const tr = body.rows[i];
    tr.classList.add("finding-row", `severity-${row.severity}`);
    tr.addEventListener("click", () => onDrilldown(row.drilldownQuery));
  });
  root.appendChild(grid);
  return root;
}
