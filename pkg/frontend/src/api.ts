import type {
  ApiErrorBody,
  FindingsResponse,
  RenderPayload,
  SearchResponse,
} from "./types.js";

/** Minimal transport so tests can inject canned responses. */
export type Transport = (
  url: string,
  init?: { method?: string; body?: string; signal?: AbortSignal },
) => Promise<{ status: number; json(): Promise<unknown> }>;

export class ParseFailure extends Error {
  constructor(
    message: string,
    public offset: number,
    public expected: string[],
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private base: string = "",
    private transport: Transport = (url, init) => fetch(url, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.transport(this.base + path);
    if (resp.status !== 200) {
      throw new Error(`GET ${path} failed with ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  async search(
    query: string,
    range?: { earliest?: number; latest?: number },
    signal?: AbortSignal,
  ): Promise<SearchResponse> {
    const resp = await this.transport(this.base + "/api/search", {
      method: "POST",
      body: JSON.stringify({
        query,
        earliest: range?.earliest ?? null,
        latest: range?.latest ?? null,
        profile: true,
      }),
      signal,
    });
    const body = (await resp.json()) as SearchResponse | ApiErrorBody;
    if (resp.status === 400 && "error" in body) {
      throw new ParseFailure(body.error.message, body.error.offset, body.error.expected);
    }
    if (resp.status !== 200) {
      throw new Error(`search failed with ${resp.status}`);
    }
    return body as SearchResponse;
  }

  renderDashboard(id: string): Promise<RenderPayload> {
    return this.get<RenderPayload>(`/api/dashboards/${encodeURIComponent(id)}/render`);
  }

  listDashboards(): Promise<{ dashboards: { id: string; title: string }[] }> {
    return this.get(`/api/dashboards`);
  }

  findings(): Promise<FindingsResponse> {
    return this.get<FindingsResponse>(`/api/findings`);
  }

  health(): Promise<{ status: string; indexes: Record<string, number> }> {
    return this.get(`/api/health`);
  }
}
