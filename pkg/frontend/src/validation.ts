/** Client-side mirrors of the service's domain validators.
 *
 * Invalid forms never leave the browser: submit is blocked before any
 * request is made.
 */

import type { CaseFeaturesBody, CaseForm, Weights } from "./types";

export const SURGERY_TYPE_COUNT = 8;

export interface ValidationResult {
  features: CaseFeaturesBody | null;
  errors: Record<string, string>;
}

function parseNumber(raw: string): number | null {
  if (raw.trim() === "") return null;
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}

export function validateCaseForm(form: CaseForm): ValidationResult {
  const errors: Record<string, string> = {};

  const age = parseNumber(form.age);
  if (age === null || !Number.isInteger(age)) {
    errors.age = "age is required (whole years)";
  } else if (age < 18) {
    errors.age = "adult patients only (age must be at least 18)";
  }

  const weight = parseNumber(form.weight_kg);
  if (weight === null || weight <= 0) {
    errors.weight_kg = "weight must be a positive number of kg";
  }

  const asa = parseNumber(form.asa_class);
  if (asa === null || !Number.isInteger(asa) || asa < 1 || asa > 5) {
    errors.asa_class = "ASA class must be 1-5";
  }

  const duration = parseNumber(form.surgery_duration_min);
  if (duration === null || duration <= 0) {
    errors.surgery_duration_min = "surgery duration must be positive minutes";
  }

  const surgeryType = parseNumber(form.surgery_type);
  if (
    surgeryType === null ||
    !Number.isInteger(surgeryType) ||
    surgeryType < 0 ||
    surgeryType >= SURGERY_TYPE_COUNT
  ) {
    errors.surgery_type = `surgery type must be 0-${SURGERY_TYPE_COUNT - 1}`;
  }

  const comorbidity = parseNumber(form.comorbidity_score);
  if (comorbidity === null || comorbidity < 0) {
    errors.comorbidity_score = "comorbidity score must be 0 or more";
  }

  // Display-only context field, still validated to the 11-point scale.
  if (form.current_nrs.trim() !== "") {
    const nrs = parseNumber(form.current_nrs);
    if (nrs === null || !Number.isInteger(nrs) || nrs < 0 || nrs > 10) {
      errors.current_nrs = "pain rating must be a whole number 0-10";
    }
  }

  if (Object.keys(errors).length > 0) {
    return { features: null, errors };
  }
  return {
    features: {
      age: age as number,
      weight_kg: weight as number,
      sex: form.sex,
      asa_class: asa as number,
      surgery_duration_min: duration as number,
      surgery_type: surgeryType as number,
      chronic_opioid_use: form.chronic_opioid_use,
      comorbidity_score: comorbidity as number,
    },
    errors: {},
  };
}

export function validateWeights(weights: Weights): string | null {
  if (weights.w_pain < 0 || weights.w_orades < 0) {
    return "weights must not be negative";
  }
  if (weights.w_pain + weights.w_orades <= 0) {
    return "at least one weight must be positive";
  }
  return null;
}

/** Map a 0-100 trade-off slider position onto (w_pain, w_orades).
 *
 * The two ends are the pure policies; every position keeps the weight sum
 * at 1, so the pair always satisfies the service's constraint.
 */
export function sliderToWeights(position: number): Weights {
  const clamped = Math.min(100, Math.max(0, position));
  return { w_pain: (100 - clamped) / 100, w_orades: clamped / 100 };
}
