import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api";

interface Recorded {
  url: string;
  method: string;
  body: unknown;
}

function fakeFetch(status: number, payload: unknown, log: Recorded[]) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const headers = (init?.headers ?? {}) as Record<string, string>;
    const isJson = headers["Content-Type"] === "application/json";
    log.push({
      url,
      method: init?.method ?? "GET",
      body: isJson && typeof init?.body === "string" ? JSON.parse(init.body) : init?.body,
    });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    } as Response;
  };
}

describe("ApiClient", () => {
  it("targets the documented endpoints with JSON bodies", async () => {
    const log: Recorded[] = [];
    const client = new ApiClient("http://svc", fakeFetch(200, {}, log));
    await client.createSession({ query_text: "q", top_k: 5, oracle_id: "mock" });
    await client.startInsight("s-1", { family: "combination" });
    await client.startCounterfactual("s-1", { kind: "reordering" });
    await client.getJob("j-1");
    await client.getResult("r-1");
    await client.listOracles();
    expect(log.map((r) => `${r.method} ${r.url}`)).toEqual([
      "POST http://svc/sessions",
      "POST http://svc/sessions/s-1/insights",
      "POST http://svc/sessions/s-1/counterfactuals",
      "GET http://svc/jobs/j-1",
      "GET http://svc/results/r-1",
      "GET http://svc/oracles",
    ]);
    expect(log[0].body).toEqual({ query_text: "q", top_k: 5, oracle_id: "mock" });
    expect(log[1].body).toEqual({ family: "combination" });
  });

  it("posts corpus bodies as raw JSONL", async () => {
    const log: Recorded[] = [];
    const client = new ApiClient("http://svc", fakeFetch(200, { document_count: 2 }, log));
    const jsonl = '{"id": "a", "contents": "x"}\n{"id": "b", "contents": "y"}';
    const out = await client.ingestCorpus(jsonl);
    expect(out.document_count).toBe(2);
    expect(log[0].body).toBe(jsonl);
  });

  it("surfaces service error payloads verbatim", async () => {
    const payload = { code: "no_results", message: "retrieval returned no documents", details: {} };
    const client = new ApiClient("http://svc", fakeFetch(404, payload, []));
    try {
      await client.getSession("missing");
      expect.unreachable("should have thrown");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      const apiError = error as ApiError;
      expect(apiError.status).toBe(404);
      expect(apiError.payload).toEqual(payload);
      expect(apiError.message).toBe(payload.message);
    }
  });
});
