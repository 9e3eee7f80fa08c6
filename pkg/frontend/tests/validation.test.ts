import { describe, expect, it } from "vitest";

import { sliderToWeights, validateCaseForm, validateWeights } from "../src/validation";
import { VALID_FORM } from "./helpers";

describe("validateCaseForm", () => {
  it("accepts a complete adult case", () => {
    const { features, errors } = validateCaseForm(VALID_FORM);
    expect(errors).toEqual({});
    expect(features).not.toBeNull();
    expect(features!.age).toBe(62);
    expect(features!.weight_kg).toBe(85);
  });

  it("rejects minors before any request", () => {
    const { features, errors } = validateCaseForm({ ...VALID_FORM, age: "17" });
    expect(features).toBeNull();
    expect(errors.age).toMatch(/18/);
  });

  it("rejects pain ratings outside the 11-point scale", () => {
    for (const bad of ["11", "-1", "3.5"]) {
      const { features, errors } = validateCaseForm({
        ...VALID_FORM,
        current_nrs: bad,
      });
      expect(features).toBeNull();
      expect(errors.current_nrs).toBeDefined();
    }
  });

  it("accepts every on-scale pain rating", () => {
    for (let nrs = 0; nrs <= 10; nrs++) {
      const { errors } = validateCaseForm({
        ...VALID_FORM,
        current_nrs: String(nrs),
      });
      expect(errors).toEqual({});
    }
  });

  it("rejects out-of-range ASA and surgery type", () => {
    expect(validateCaseForm({ ...VALID_FORM, asa_class: "6" }).errors.asa_class)
      .toBeDefined();
    expect(
      validateCaseForm({ ...VALID_FORM, surgery_type: "8" }).errors.surgery_type,
    ).toBeDefined();
  });

  it("rejects nonpositive weight and duration", () => {
    expect(validateCaseForm({ ...VALID_FORM, weight_kg: "0" }).errors.weight_kg)
      .toBeDefined();
    expect(
      validateCaseForm({ ...VALID_FORM, surgery_duration_min: "-5" }).errors
        .surgery_duration_min,
    ).toBeDefined();
  });
});

describe("validateWeights", () => {
  it("rejects the all-zero pair", () => {
    expect(validateWeights({ w_pain: 0, w_orades: 0 })).not.toBeNull();
  });

  it("rejects negative weights", () => {
    expect(validateWeights({ w_pain: -0.1, w_orades: 0.5 })).not.toBeNull();
  });

  it("accepts one-sided weights", () => {
    expect(validateWeights({ w_pain: 0, w_orades: 1 })).toBeNull();
    expect(validateWeights({ w_pain: 1, w_orades: 0 })).toBeNull();
  });
});

describe("sliderToWeights", () => {
  it("keeps the weight sum at one across the whole range", () => {
    for (let pos = 0; pos <= 100; pos += 5) {
      const w = sliderToWeights(pos);
      expect(w.w_pain + w.w_orades).toBeCloseTo(1, 12);
      expect(validateWeights(w)).toBeNull();
    }
  });

  it("maps the ends onto the pure policies", () => {
    expect(sliderToWeights(0)).toEqual({ w_pain: 1, w_orades: 0 });
    expect(sliderToWeights(100)).toEqual({ w_pain: 0, w_orades: 1 });
  });
});
