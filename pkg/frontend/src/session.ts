import { ApiClient, ParseFailure } from "./api.js";
import { buildErrorView, buildResultsView, type SearchView } from "./views.js";

export interface HistoryEntry {
  /** The exact text the user submitted, byte for byte. */
  query: string;
  earliest: number | null;
  latest: number | null;
  view: SearchView;
}

/** One in-flight search at a time; new submissions cancel the pending one. */
export class SearchSession {
  history: HistoryEntry[] = [];
  private pending: AbortController | null = null;
  private generation = 0;

  constructor(private api: ApiClient) {}

  get last(): HistoryEntry | null {
    return this.history.length ? this.history[this.history.length - 1] : null;
  }

  async submit(
    query: string,
    range: { earliest?: number | null; latest?: number | null } = {},
  ): Promise<SearchView | null> {
    this.pending?.abort();
    const controller = new AbortController();
    this.pending = controller;
    const mine = ++this.generation;
    let view: SearchView;
    try {
      const response = await this.api.search(
        query,
        {
          earliest: range.earliest ?? undefined,
          latest: range.latest ?? undefined,
        },
        controller.signal,
      );
      view = buildResultsView(query, response);
    } catch (err) {
      if (mine !== this.generation) return null; // superseded while in flight
      if (err instanceof ParseFailure) {
        view = buildErrorView(query, err.message, err.offset, err.expected);
      } else if ((err as Error).name === "AbortError") {
        return null;
      } else {
        throw err;
      }
    }
    if (mine !== this.generation) return null;
    this.pending = null;
    this.history.push({
      query,
      earliest: range.earliest ?? null,
      latest: range.latest ?? null,
      view,
    });
    return view;
  }

  /** Pop the current entry and return the previous one (stack semantics). */
  back(): HistoryEntry | null {
    if (this.history.length < 2) return null;
    this.history.pop();
    return this.last;
  }
}
