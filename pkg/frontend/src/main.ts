import { ApiClient } from "./api.js";
import {
  dashboardNode,
  el,
  errorNode,
  findingsNode,
  resultsNode,
} from "./dom.js";
import { SearchSession } from "./session.js";
import { buildDashboardView, buildFindingsView } from "./views.js";
import type { FindingsFilter } from "./views.js";

const api = new ApiClient("");
const session = new SearchSession(api);

const content = () => document.getElementById("content")!;

function setActiveNav(route: string): void {
  document.querySelectorAll("nav a").forEach((a) => {
    a.classList.toggle("active", a.getAttribute("href") === `#/${route}`);
  });
}

function showSearchView(): void {
  setActiveNav("search");
  const root = el("div", "search-page");
  const bar = el("form", "query-bar");
  const input = el("input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "search terms | stage | stage ...";
  input.value = session.last?.query ?? "sourcetype=applog | stats count by level";
  const run = el("button", "run", "Search");
  const back = el("button", "back", "Back");
  back.type = "button";
  bar.append(input, run, back);
  const output = el("div", "search-output");
  root.append(bar, output);

  const render = () => {
    output.replaceChildren();
    const entry = session.last;
    if (!entry) return;
    input.value = entry.query;
    output.appendChild(
      entry.view.kind === "results" ? resultsNode(entry.view) : errorNode(entry.view),
    );
  };

  bar.addEventListener("submit", (event) => {
    event.preventDefault();
    session.submit(input.value).then((view) => {
      if (view) render();
    });
  });
  back.addEventListener("click", () => {
    if (session.back()) render();
  });

  content().replaceChildren(root);
  render();
}

export function drillDown(query: string): void {
  window.location.hash = "#/search";
  // The hash change re-renders the search page; submit once it is up.
  queueMicrotask(() => {
    const input = document.querySelector<HTMLInputElement>(".query-bar input");
    if (input) input.value = query;
    session.submit(query).then(() => route());
  });
}

async function showDashboard(): Promise<void> {
  setActiveNav("dashboard");
  content().replaceChildren(el("div", "loading", "rendering dashboard..."));
  try {
    const payload = await api.renderDashboard("main");
    const view = buildDashboardView(payload);
    content().replaceChildren(dashboardNode(view, drillDown));
  } catch (err) {
    content().replaceChildren(el("div", "panel-error", String(err)));
  }
}

async function showFindings(filter: FindingsFilter = {}): Promise<void> {
  setActiveNav("findings");
  content().replaceChildren(el("div", "loading", "loading findings..."));
  try {
    const payload = await api.findings();
    const view = buildFindingsView(payload.findings, filter);
    const root = el("div", "findings-page");
    const controls = el("div", "findings-controls");
    const severity = el("select") as HTMLSelectElement;
    severity.append(new Option("all severities", ""));
    view.severities.forEach((s) => severity.append(new Option(s, s)));
    if (filter.severity) severity.value = filter.severity;
    const rule = el("select") as HTMLSelectElement;
    rule.append(new Option("all rules", ""));
    view.rules.forEach((r) => rule.append(new Option(r, r)));
    if (filter.rule) rule.value = filter.rule;
    const refresh = () =>
      showFindings({
        severity: severity.value || undefined,
        rule: rule.value || undefined,
      });
    severity.addEventListener("change", refresh);
    rule.addEventListener("change", refresh);
    controls.append(severity, rule);
    root.append(controls, findingsNode(view, drillDown));
    content().replaceChildren(root);
  } catch (err) {
    content().replaceChildren(el("div", "panel-error", String(err)));
  }
}

function route(): void {
  const hash = window.location.hash || "#/dashboard";
  if (hash.startsWith("#/search")) showSearchView();
  else if (hash.startsWith("#/findings")) void showFindings();
  else void showDashboard();
}

window.addEventListener("hashchange", route);
window.addEventListener("DOMContentLoaded", route);
