/** Typed client for the review service HTTP endpoints. */

import type { DecisionRecord, Projection, Scenario, Stats } from "./types.js";

/** Minimal response surface the client needs; window.fetch satisfies it. */
export interface FetchResponseLike {
  status: number;
  json(): Promise<unknown>;
}

export interface FetchInit {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}

/**
 * Injectable transport. The browser passes window.fetch; tests pass a
 * counting wrapper or a node:http shim.
 */
export type FetchLike = (url: string, init?: FetchInit) => Promise<FetchResponseLike>;

/** The service answered with a non-success status and a structured error. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
    this.name = "ApiError";
  }
}

/** The request never produced an HTTP response (connection refused, DNS...). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(cause instanceof Error ? cause.message : String(cause));
    this.name = "NetworkError";
  }
}

export interface DecisionRequest {
  scenario_id: string;
  reviewer_id: string;
  role: string;
  choice: string;
}

/** The surface the rest of the app consumes; ApiClient is the live one. */
export interface ReviewApi {
  queue(reviewerId: string, limit?: number): Promise<Scenario[]>;
  submitDecision(decision: DecisionRequest): Promise<DecisionRecord>;
  stats(): Promise<Stats>;
  projection(): Promise<Projection>;
}

const defaultFetch: FetchLike = (url, init) => globalThis.fetch(url, init);

export class ApiClient implements ReviewApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchLike: FetchLike = defaultFetch,
  ) {}

  private async request(path: string, init?: FetchInit): Promise<unknown> {
    let response: FetchResponseLike;
    try {
      response = await this.fetchLike(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    let payload: unknown = null;
    try {
      payload = await response.json();
    } catch {
      payload = null;
    }
    if (response.status < 200 || response.status >= 300) {
      const record = (payload ?? {}) as { error?: string; detail?: string };
      throw new ApiError(
        response.status,
        record.error ?? "UnknownError",
        record.detail ?? "the service reported an error",
      );
    }
    return payload;
  }

  async queue(reviewerId: string, limit = 50): Promise<Scenario[]> {
    const query = `reviewer=${encodeURIComponent(reviewerId)}&limit=${limit}`;
    return (await this.request(`/queue?${query}`)) as Scenario[];
  }

  async submitDecision(decision: DecisionRequest): Promise<DecisionRecord> {
    const payload = await this.request("/decision", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
    return payload as DecisionRecord;
  }

  async stats(): Promise<Stats> {
    return (await this.request("/stats")) as Stats;
  }

  async projection(): Promise<Projection> {
    return (await this.request("/projection")) as Projection;
  }
}
