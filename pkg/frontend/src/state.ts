/** Session state transitions for the what-if console.
 *
 * A submit fires the curve and recommendation requests together and applies
 * them atomically: both responses or neither. Each submit carries a sequence
 * number; only the newest in-flight pair may update state, and a pair whose
 * two responses disagree on the model version hash (a hot swap happened
 * mid-flight) is discarded as stale.
 */

import { ApiError, fetchCurve, fetchRecommend } from "./api";
import type { SessionState } from "./types";
import { validateCaseForm, validateWeights } from "./validation";

let submitCounter = 0;

/** Visible for tests: reset the sequence counter between scenarios. */
export function resetSubmitCounter(): void {
  submitCounter = 0;
}

export interface SubmitOutcome {
  state: SessionState;
  requested: boolean;
}

export async function submitWhatIf(state: SessionState): Promise<SubmitOutcome> {
  const { features, errors } = validateCaseForm(state.form);
  const weightError = validateWeights(state.weights);
  if (weightError !== null) {
    errors.weights = weightError;
  }
  if (features === null || Object.keys(errors).length > 0) {
    return {
      state: { ...state, fieldErrors: errors },
      requested: false,
    };
  }

  const seq = ++submitCounter;
  try {
    const [curve, recommendation] = await Promise.all([
      fetchCurve(features, state.weights),
      fetchRecommend(features, state.weights),
    ]);
    if (seq !== submitCounter) {
      return { state, requested: true }; // a newer submit superseded this one
    }
    if (curve.version_hash !== recommendation.version_hash) {
      return {
        state: { ...state, banner: "model changed mid-request; please retry" },
        requested: true,
      };
    }
    return {
      state: {
        ...state,
        curve,
        recommendation,
        modelVersion: curve.version_hash,
        fieldErrors: {},
        banner: null,
        appliedSeq: seq,
      },
      requested: true,
    };
  } catch (err) {
    if (seq !== submitCounter) {
      return { state, requested: true };
    }
    if (err instanceof ApiError && err.status === 400) {
      const mapped: Record<string, string> = {};
      for (const fieldError of err.fieldErrors) {
        mapped[fieldError.field.replace(/^features\./, "")] = fieldError.message;
      }
      return {
        state: { ...state, fieldErrors: mapped },
        requested: true,
      };
    }
    return {
      state: { ...state, banner: "cannot reach the dose service" },
      requested: true,
    };
  }
}
