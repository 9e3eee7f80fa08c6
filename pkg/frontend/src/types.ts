/** Wire types mirroring the dose service's JSON API. */

export interface CaseFeaturesBody {
  age: number;
  weight_kg: number;
  sex: "female" | "male";
  asa_class: number;
  surgery_duration_min: number;
  surgery_type: number;
  chronic_opioid_use: boolean;
  comorbidity_score: number;
}

export interface Weights {
  w_pain: number;
  w_orades: number;
}

export interface RecommendResponse {
  version_hash: string;
  dose_meq: number;
  expected_utility: number;
  pain_at_dose: number;
  orade_at_dose: number;
  weights: Weights;
  warnings: string[];
}

export interface CurveResponse {
  version_hash: string;
  weights: Weights;
  doses: number[];
  pain_hat: number[];
  orade_hat: number[];
  utility: number[];
  pain_spread: number[] | null;
  orade_spread: number[] | null;
}

export interface ModelInfoResponse {
  version_hash: string;
  grid: { min_meq: number; max_meq: number; step_meq: number; n_points: number };
  registry: string[];
  pain_learner: string;
  orade_learner: string;
  pain_timepoint: string;
  warnings: string[];
  default_weights: Weights;
}

export interface FieldError {
  field: string;
  message: string;
}

/** Raw form values as typed by the operator (strings until validated). */
export interface CaseForm {
  age: string;
  weight_kg: string;
  sex: "female" | "male";
  asa_class: string;
  surgery_duration_min: string;
  surgery_type: string;
  chronic_opioid_use: boolean;
  comorbidity_score: string;
  /** Observed pain (NRS 0-10); display-only context, never sent upstream. */
  current_nrs: string;
}

export interface SessionState {
  form: CaseForm;
  weights: Weights;
  curve: CurveResponse | null;
  recommendation: RecommendResponse | null;
  modelVersion: string | null;
  fieldErrors: Record<string, string>;
  banner: string | null;
  appliedSeq: number;
}

export const defaultForm = (): CaseForm => ({
  age: "",
  weight_kg: "",
  sex: "female",
  asa_class: "2",
  surgery_duration_min: "",
  surgery_type: "0",
  chronic_opioid_use: false,
  comorbidity_score: "0",
  current_nrs: "",
});

export const initialState = (): SessionState => ({
  form: defaultForm(),
  weights: { w_pain: 0.5, w_orades: 0.5 },
  curve: null,
  recommendation: null,
  modelVersion: null,
  fieldErrors: {},
  banner: null,
  appliedSeq: 0,
});
