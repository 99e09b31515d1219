/** Typed client for the diagnosis-session HTTP service.
 *
 * Every method resolves to the parsed response body after a light shape
 * check, so callers downstream can trust the documented fields. Failures
 * split three ways: ServiceError carries the service's own {code, message}
 * body, MalformedResponseError flags a 2xx body that does not match the
 * documented shape, and anything else (connection refused, DNS, abort)
 * propagates as the underlying fetch rejection.
 */

export interface PointEntry {
  diagnosis: string;
  p: number;
}

export interface IntervalEntry {
  diagnosis: string;
  lower: number;
  upper: number;
  retained: boolean;
}

export type DifferentialEntry = PointEntry | IntervalEntry;

export function isInterval(entry: DifferentialEntry): entry is IntervalEntry {
  return "lower" in entry;
}

export interface NetworkInfo {
  network_id: string;
  node_count: number;
  diagnosis: string;
  diagnosis_values: string[];
  features: string[];
  feature_values: Record<string, string[]>;
}

export interface Portion {
  id: number;
  features: string[];
}

export interface HistoryItem {
  feature: string;
  value: string;
}

export type SessionMode = "ad" | "ctp" | "bounded";

export interface Retention {
  mode: "threshold" | "top_k";
  value: number;
}

export interface SessionSnapshot {
  session_id: string;
  network_id: string;
  mode: SessionMode;
  diagnosis: string;
  differential: DifferentialEntry[];
  observed: Record<string, string>;
  history: HistoryItem[];
  portions: Portion[];
  rank_uncertain?: boolean;
}

export interface ObservationResponse {
  differential: DifferentialEntry[];
  touched_portions: number[];
  observed: Record<string, string>;
  rank_uncertain?: boolean;
}

export interface RetractionResponse {
  differential: DifferentialEntry[];
  observed: Record<string, string>;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class MalformedResponseError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedResponseError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function checkDifferential(value: unknown): DifferentialEntry[] {
  if (!Array.isArray(value)) {
    throw new MalformedResponseError("differential is not a list");
  }
  for (const entry of value) {
    if (!isRecord(entry) || typeof entry.diagnosis !== "string") {
      throw new MalformedResponseError("differential entry lacks a diagnosis");
    }
    const point = typeof entry.p === "number";
    const interval =
      typeof entry.lower === "number" && typeof entry.upper === "number";
    if (!point && !interval) {
      throw new MalformedResponseError(
        "differential entry has neither a probability nor bounds",
      );
    }
  }
  return value as DifferentialEntry[];
}

function checkObserved(value: unknown): Record<string, string> {
  if (!isRecord(value)) {
    throw new MalformedResponseError("observed is not an object");
  }
  return value as Record<string, string>;
}

function checkSnapshot(body: Record<string, unknown>): SessionSnapshot {
  if (typeof body.session_id !== "string" || typeof body.diagnosis !== "string") {
    throw new MalformedResponseError("session snapshot lacks its identifiers");
  }
  checkDifferential(body.differential);
  checkObserved(body.observed);
  if (!Array.isArray(body.portions) || !Array.isArray(body.history)) {
    throw new MalformedResponseError("session snapshot lacks portions or history");
  }
  return body as unknown as SessionSnapshot;
}

function defaultFetch(): FetchLike {
  const bound = globalThis.fetch;
  if (typeof bound !== "function") {
    return () => Promise.reject(new Error("no fetch implementation available"));
  }
  return bound.bind(globalThis);
}

export class ServiceClient {
  private fetchFn: FetchLike;

  constructor(
    private baseUrl: string,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? defaultFetch();
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = undefined;
    try {
      body = await response.json();
    } catch {
      body = undefined;
    }
    if (!response.ok) {
      const code =
        isRecord(body) && typeof body.code === "string" ? body.code : "http_error";
      const message =
        isRecord(body) && typeof body.message === "string"
          ? body.message
          : `HTTP ${response.status}`;
      throw new ServiceError(response.status, code, message);
    }
    if (body === undefined) {
      throw new MalformedResponseError("response body is not JSON");
    }
    return body;
  }

  private post(path: string, payload: unknown): Promise<unknown> {
    return this.request(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  async listNetworks(): Promise<NetworkInfo[]> {
    const body = await this.request("/networks");
    if (!Array.isArray(body)) {
      throw new MalformedResponseError("network listing is not a list");
    }
    for (const entry of body) {
      if (!isRecord(entry) || typeof entry.network_id !== "string") {
        throw new MalformedResponseError("network entry lacks an id");
      }
    }
    return body as NetworkInfo[];
  }

  async uploadNetwork(network: unknown, networkId?: string): Promise<string> {
    const body = await this.post("/networks", {
      network,
      network_id: networkId ?? null,
    });
    if (!isRecord(body) || typeof body.network_id !== "string") {
      throw new MalformedResponseError("upload response lacks a network id");
    }
    return body.network_id;
  }

  async createSession(
    networkId: string,
    mode: SessionMode = "ad",
    retention?: Retention,
  ): Promise<SessionSnapshot> {
    const payload: Record<string, unknown> = { network_id: networkId, mode };
    if (retention !== undefined) {
      payload.retention = retention;
    }
    const body = await this.post("/sessions", payload);
    if (!isRecord(body)) {
      throw new MalformedResponseError("session response is not an object");
    }
    return checkSnapshot(body);
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    const body = await this.request(`/sessions/${sessionId}`);
    if (!isRecord(body)) {
      throw new MalformedResponseError("session response is not an object");
    }
    return checkSnapshot(body);
  }

  async addObservation(
    sessionId: string,
    feature: string,
    value: string,
  ): Promise<ObservationResponse> {
    const body = await this.post(`/sessions/${sessionId}/observations`, {
      feature,
      value,
    });
    if (!isRecord(body)) {
      throw new MalformedResponseError("observation response is not an object");
    }
    checkDifferential(body.differential);
    checkObserved(body.observed);
    if (!Array.isArray(body.touched_portions)) {
      throw new MalformedResponseError("observation response lacks touched portions");
    }
    return body as unknown as ObservationResponse;
  }

  async retractObservation(
    sessionId: string,
    feature: string,
  ): Promise<RetractionResponse> {
    const body = await this.request(
      `/sessions/${sessionId}/observations/${feature}`,
      { method: "DELETE" },
    );
    if (!isRecord(body)) {
      throw new MalformedResponseError("retraction response is not an object");
    }
    checkDifferential(body.differential);
    checkObserved(body.observed);
    return body as unknown as RetractionResponse;
  }
}
