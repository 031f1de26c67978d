/** Shapes of the JSON API payloads the UI consumes. */

export type Cell = string | number | null;

export interface SearchResponse {
  columns: string[];
  rows: Cell[][];
  provenance?: (number | null)[] | null;
  profile?: ProfilePayload;
  density?: string;
}

export interface ProfilePayload {
  total_seconds: number;
  hits: number;
  scanned: number;
  density: string;
  components: {
    name: string;
    duration_s: number;
    calls: number;
    input_count: number | null;
    output_count: number | null;
  }[];
}

export interface ApiErrorBody {
  error: {
    message: string;
    offset: number;
    expected: string[];
  };
}

export interface PanelPayload {
  title: string;
  viz: string;
  quadrant: string;
  query: string;
  drilldown_query?: string;
  columns?: string[];
  rows?: Cell[][];
  provenance?: (number | null)[] | null;
  density?: string;
  error?: string;
}

export interface KpiPayload {
  score: number;
  quadrants: Record<string, { raw: number; penalty: number; weight: number }>;
}

export interface RenderPayload {
  id: string;
  title: string;
  kpi: KpiPayload;
  panels: PanelPayload[];
}

export interface Finding {
  rule: string;
  owasp: string;
  severity: string;
  event_id: number;
  excerpt: string;
  detected_at: number;
  uri: string;
}

export interface FindingsResponse {
  findings: Finding[];
  total: number;
}
