/** Console bootstrap: form wiring, trade-off slider, submit flow. */

import { fetchModelInfo } from "./api";
import { resetSubmitCounter, submitWhatIf } from "./state";
import { initialState, type SessionState } from "./types";
import { renderAll } from "./view";
import { sliderToWeights, validateWeights } from "./validation";

export function readFormInto(state: SessionState, root: ParentNode): SessionState {
  const value = (id: string) =>
    (root.querySelector(`#${id}`) as HTMLInputElement | HTMLSelectElement).value;
  const checked = (id: string) =>
    (root.querySelector(`#${id}`) as HTMLInputElement).checked;
  const advanced = (root.querySelector("#advanced-weights") as HTMLInputElement).checked;

  let weights;
  if (advanced) {
    weights = {
      w_pain: Number(value("w-pain")),
      w_orades: Number(value("w-orades")),
    };
  } else {
    weights = sliderToWeights(Number(value("tradeoff")));
  }
  return {
    ...state,
    form: {
      age: value("age"),
      weight_kg: value("weight"),
      sex: value("sex") as "female" | "male",
      asa_class: value("asa"),
      surgery_duration_min: value("duration"),
      surgery_type: value("surgery-type"),
      chronic_opioid_use: checked("chronic"),
      comorbidity_score: value("comorbidity"),
      current_nrs: value("nrs"),
    },
    weights,
  };
}

export function wireConsole(root: ParentNode): { getState: () => SessionState } {
  let state = initialState();
  resetSubmitCounter();

  const form = root.querySelector("#case-form") as HTMLFormElement;
  const tradeoff = root.querySelector("#tradeoff") as HTMLInputElement;
  const tradeoffLabel = root.querySelector("#tradeoff-label") as HTMLElement;

  const updateTradeoffLabel = () => {
    const w = sliderToWeights(Number(tradeoff.value));
    tradeoffLabel.textContent = `pain ${w.w_pain.toFixed(2)} / adverse events ${w.w_orades.toFixed(2)}`;
  };
  tradeoff.addEventListener("input", updateTradeoffLabel);
  updateTradeoffLabel();

  const doSubmit = async () => {
    state = readFormInto(state, root);
    const weightError = validateWeights(state.weights);
    if (weightError) {
      state = { ...state, fieldErrors: { weights: weightError } };
      renderAll(root, state);
      return;
    }
    const outcome = await submitWhatIf(state);
    state = outcome.state;
    renderAll(root, state);
  };

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void doSubmit();
  });
  root.querySelector("#banner")?.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.role === "retry") void doSubmit();
  });

  void fetchModelInfo()
    .then((info) => {
      state = { ...state, modelVersion: info.version_hash, banner: null };
      renderAll(root, state);
    })
    .catch(() => {
      state = { ...state, banner: "cannot reach the dose service" };
      renderAll(root, state);
    });

  return { getState: () => state };
}

if (typeof document !== "undefined" && document.querySelector("#case-form")) {
  wireConsole(document);
}
