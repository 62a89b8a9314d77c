/** Thin typed client for the explanation service; the UI's only data source. */

import type {
  ErrorPayload,
  JobPayload,
  OracleEntry,
  ResultPayload,
  SessionPayload,
} from "./types";

/** Non-2xx responses surface the service's error payload verbatim. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly payload: ErrorPayload,
  ) {
    super(payload.message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ErrorPayload);
    }
    return body as T;
  }

  ingestCorpus(jsonl: string): Promise<{ document_count: number }> {
    return this.request("/corpus", { method: "POST", body: jsonl });
  }

  listOracles(): Promise<{ oracles: OracleEntry[] }> {
    return this.request("/oracles");
  }

  registerOracle(spec: Record<string, unknown>): Promise<{ oracle_id: string }> {
    return this.request("/oracles", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(spec),
    });
  }

  createSession(body: {
    query_text: string;
    top_k: number;
    oracle_id: string;
  }): Promise<SessionPayload> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request(`/sessions/${sessionId}`);
  }

  startInsight(sessionId: string, body: Record<string, unknown>): Promise<JobPayload> {
    return this.request(`/sessions/${sessionId}/insights`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  startCounterfactual(sessionId: string, body: Record<string, unknown>): Promise<JobPayload> {
    return this.request(`/sessions/${sessionId}/counterfactuals`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getJob(jobId: string): Promise<JobPayload> {
    return this.request(`/jobs/${jobId}`);
  }

  getResult(resultId: string): Promise<ResultPayload> {
    return this.request(`/results/${resultId}`);
  }
}
