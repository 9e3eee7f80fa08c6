/** Typed client for the dose service; the console's only data source. */

import type {
  CaseFeaturesBody,
  CurveResponse,
  FieldError,
  ModelInfoResponse,
  RecommendResponse,
  Weights,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public fieldErrors: FieldError[],
    message: string,
  ) {
    super(message);
  }
}

async function post<T>(path: string, body: unknown): Promise<T> {
  const response = await fetch(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    let fields: FieldError[] = [];
    try {
      const payload = await response.json();
      if (Array.isArray(payload.errors)) fields = payload.errors;
    } catch {
      // non-JSON error body: keep the status-based message
    }
    throw new ApiError(response.status, fields, `${path} failed (${response.status})`);
  }
  return (await response.json()) as T;
}

export function fetchRecommend(
  features: CaseFeaturesBody,
  weights: Weights,
): Promise<RecommendResponse> {
  return post<RecommendResponse>("/v1/recommend", { features, weights });
}

export function fetchCurve(
  features: CaseFeaturesBody,
  weights: Weights,
): Promise<CurveResponse> {
  return post<CurveResponse>("/v1/curve", { features, weights });
}

export async function fetchModelInfo(): Promise<ModelInfoResponse> {
  const response = await fetch("/v1/model");
  if (!response.ok) {
    throw new ApiError(response.status, [], `/v1/model failed (${response.status})`);
  }
  return (await response.json()) as ModelInfoResponse;
}
