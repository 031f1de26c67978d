import { describe, expect, it } from "vitest";

import { ApiClient, ParseFailure } from "../src/api.js";

describe("api client", () => {
  it("posts search requests to /api/search", async () => {
    let captured: { url?: string; method?: string; body?: string } = {};
    const api = new ApiClient("", async (url, init) => {
      captured = { url, method: init?.method, body: init?.body };
      return { status: 200, json: async () => ({ columns: [], rows: [] }) };
    });
    await api.search("ERROR | head 5", { earliest: 10, latest: 20 });
    expect(captured.url).toBe("/api/search");
    expect(captured.method).toBe("POST");
    const body = JSON.parse(captured.body!);
    expect(body).toEqual({
      query: "ERROR | head 5",
      earliest: 10,
      latest: 20,
      profile: true,
    });
  });

  it("raises ParseFailure carrying offset and expectations on 400", async () => {
    const api = new ApiClient("", async () => ({
      status: 400,
      json: async () => ({
        error: { message: "unexpected 'x'", offset: 3, expected: ["'|'"] },
      }),
    }));
    await expect(api.search("a x")).rejects.toSatisfy((err: unknown) => {
      expect(err).toBeInstanceOf(ParseFailure);
      expect((err as ParseFailure).offset).toBe(3);
      expect((err as ParseFailure).expected).toEqual(["'|'"]);
      return true;
    });
  });

  it("encodes dashboard ids in render URLs", async () => {
    let url = "";
    const api = new ApiClient("", async (u) => {
      url = u;
      return { status: 200, json: async () => ({ id: "a b", title: "", kpi: { score: 0, quadrants: {} }, panels: [] }) };
    });
    await api.renderDashboard("a b");
    expect(url).toBe("/api/dashboards/a%20b/render");
  });

  it("non-200 GET responses become errors", async () => {
    const api = new ApiClient("", async () => ({ status: 500, json: async () => ({}) }));
    await expect(api.findings()).rejects.toThrow("500");
  });
});
