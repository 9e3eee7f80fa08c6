import { vi } from "vitest";

import type { CurveResponse, RecommendResponse, Weights } from "../src/types";

export const VALID_FORM = {
  age: "62",
  weight_kg: "85",
  sex: "male" as const,
  asa_class: "3",
  surgery_duration_min: "120",
  surgery_type: "1",
  chronic_opioid_use: false,
  comorbidity_score: "2.5",
  current_nrs: "",
};

export function fakeRecommend(
  overrides: Partial<RecommendResponse> = {},
): RecommendResponse {
  return {
    version_hash: "hash-a",
    dose_meq: 4.5,
    expected_utility: -2.613,
    pain_at_dose: 3.21,
    orade_at_dose: 2.02,
    weights: { w_pain: 0.5, w_orades: 0.5 },
    warnings: [],
    ...overrides,
  };
}

export function fakeCurve(overrides: Partial<CurveResponse> = {}): CurveResponse {
  const doses = Array.from({ length: 41 }, (_, i) => i * 0.5);
  return {
    version_hash: "hash-a",
    weights: { w_pain: 0.5, w_orades: 0.5 },
    doses,
    pain_hat: doses.map((d) => 8 / (1 + d / 5)),
    orade_hat: doses.map((d) => (6 * d * d) / (d * d + 100)),
    utility: doses.map((d) => -(4 / (1 + d / 5) + (3 * d * d) / (d * d + 100))),
    pain_spread: null,
    orade_spread: null,
    ...overrides,
  };
}

export interface FetchLog {
  recommendBodies: Array<{ features: unknown; weights: Weights }>;
  curveBodies: Array<{ features: unknown; weights: Weights }>;
  calls: number;
}

/** Install a fetch stub returning canned curve/recommend responses. */
export function mockService(
  curve: CurveResponse | (() => Promise<CurveResponse>),
  recommend: RecommendResponse | (() => Promise<RecommendResponse>),
): FetchLog {
  const log: FetchLog = { recommendBodies: [], curveBodies: [], calls: 0 };
  vi.stubGlobal(
    "fetch",
    vi.fn(async (path: string, init?: RequestInit) => {
      log.calls += 1;
      const body = init?.body ? JSON.parse(init.body as string) : null;
      if (path === "/v1/curve") {
        log.curveBodies.push(body);
        const payload = typeof curve === "function" ? await curve() : curve;
        return jsonResponse(payload);
      }
      if (path === "/v1/recommend") {
        log.recommendBodies.push(body);
        const payload = typeof recommend === "function" ? await recommend() : recommend;
        return jsonResponse(payload);
      }
      throw new Error(`unexpected path ${path}`);
    }),
  );
  return log;
}

export function jsonResponse(payload: unknown, status = 200): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => payload,
  } as Response;
}

/** Resolve a field path like "recommendation.dose_meq" against a context. */
export function lookupField(context: Record<string, unknown>, path: string): unknown {
  return path.split(".").reduce<unknown>((obj, key) => {
    if (obj === null || obj === undefined) return undefined;
    return (obj as Record<string, unknown>)[key];
  }, context);
}
