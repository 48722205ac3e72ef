// Typed client for the poolkit HTTP service.  The console never computes
// probabilities itself: every number it displays originates from one of
// these responses.

export interface SessionState {
  session_id: string;
  n: number;
  m: number;
  tpr: number;
  tnr: number;
  remaining_tests: number;
  recommended_design: string | null;
  marginals: number[];
  history: { design: string; observed: number }[];
  entropy_bits: number;
  ml_secret: string;
  confidence: number;
}

export interface DecodeResult {
  marginals: number[];
  ml_secret: string;
  confidence: number;
  error_bound?: number;
  evidence_mass?: number;
  converged?: boolean;
}

export interface SessionRequest {
  n: number;
  m: number;
  tpr: number;
  tnr: number;
  prevalence?: number;
  priors?: number[];
  constraints?: { max_pool_size?: number | null; max_splits_per_sample?: number | null };
}

export interface DecodeRequest {
  design: { n: number; m: number; rows: string[] };
  outcome: string;
  method: "exact" | "mitm" | "bp" | "perfect";
  params: Record<string, unknown>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly context: Record<string, unknown> = {},
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(this.base + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(
        response.status,
        typeof payload.code === "string" ? payload.code : "error",
        typeof payload.message === "string" ? payload.message : response.statusText,
        payload.context ?? {},
      );
    }
    return payload as T;
  }

  startSession(body: SessionRequest): Promise<SessionState> {
    return this.request("POST", "/v1/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionState> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  submitResult(sessionId: string, observed: 0 | 1): Promise<SessionState> {
    return this.request("POST", `/v1/sessions/${sessionId}/results`, { observed });
  }

  decode(body: DecodeRequest): Promise<DecodeResult> {
    return this.request("POST", "/v1/decode", body);
  }
}
