// Shared test helpers: a scripted fetch stub and DOM polling.

import { SessionState } from "../src/api.js";

export function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export function scriptedFetch(script: ((call: RecordedCall) => Response)[]) {
  const calls: RecordedCall[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    calls.push(call);
    const handler = script[Math.min(calls.length - 1, script.length - 1)];
    return handler(call);
  };
  return { impl, calls };
}

export function sessionFixture(overrides: Partial<SessionState> = {}): SessionState {
  return {
    session_id: "abc123",
    n: 4,
    m: 3,
    tpr: 0.99,
    tnr: 0.9,
    remaining_tests: 3,
    recommended_design: "1100",
    marginals: [0.12345678, 0.1, 0.0999949, 0.25],
    history: [],
    entropy_bits: 1.5,
    ml_secret: "0000",
    confidence: 0.6561,
    ...overrides,
  };
}

export async function until(predicate: () => boolean, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) {
      throw new Error("timed out waiting for condition");
    }
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}
