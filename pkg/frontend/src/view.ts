/** DOM rendering for the dose explorer.
 *
 * Every displayed number carries a data-field attribute naming the service
 * response field it came from; integration tests intercept responses and
 * assert the correspondence, so the console provably does no dose math.
 */

import { renderChartSvg } from "./chart";
import type { SessionState } from "./types";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderBanner(state: SessionState): string {
  if (state.banner === null) return "";
  return `<div class="banner" data-role="error-banner">
    ${esc(state.banner)}
    <button type="button" data-role="retry">retry</button>
  </div>`;
}

export function renderWarnings(state: SessionState): string {
  const rec = state.recommendation;
  if (rec === null || rec.warnings.length === 0) return "";
  const badges = rec.warnings
    .map(
      (w, i) => `<span class="badge" data-role="warning-badge"
        data-field="recommendation.warnings.${i}">${esc(w)}</span>`,
    )
    .join(" ");
  return `<div class="warnings" data-role="warning-strip">${badges}</div>`;
}

export function renderRecommendation(state: SessionState): string {
  const rec = state.recommendation;
  if (rec === null) {
    return `<p class="placeholder">Submit a case to see its dose recommendation.</p>`;
  }
  return `
  <dl class="recommendation">
    <dt>recommended dose (MEQ)</dt>
    <dd data-field="recommendation.dose_meq">${rec.dose_meq}</dd>
    <dt>expected utility</dt>
    <dd data-field="recommendation.expected_utility">${rec.expected_utility}</dd>
    <dt>predicted pain at dose</dt>
    <dd data-field="recommendation.pain_at_dose">${rec.pain_at_dose}</dd>
    <dt>predicted adverse-event severity at dose</dt>
    <dd data-field="recommendation.orade_at_dose">${rec.orade_at_dose}</dd>
    <dt>weights used</dt>
    <dd>
      <span data-field="recommendation.weights.w_pain">${rec.weights.w_pain}</span> pain /
      <span data-field="recommendation.weights.w_orades">${rec.weights.w_orades}</span> adverse events
    </dd>
  </dl>`;
}

export function renderExplorer(state: SessionState): string {
  if (state.curve === null) {
    return `<p class="placeholder">No curves fetched yet.</p>`;
  }
  return `
  ${renderWarnings(state)}
  ${renderChartSvg(state.curve, state.recommendation)}
  <p class="model-version">model
    <code data-field="curve.version_hash">${esc(state.curve.version_hash)}</code></p>`;
}

export function renderFieldErrors(state: SessionState): string {
  const entries = Object.entries(state.fieldErrors);
  if (entries.length === 0) return "";
  return `<ul class="field-errors" data-role="field-errors">${entries
    .map(([field, msg]) => `<li data-error-for="${esc(field)}">${esc(msg)}</li>`)
    .join("")}</ul>`;
}

export function renderAll(root: ParentNode, state: SessionState): void {
  const banner = root.querySelector("#banner");
  const errors = root.querySelector("#form-errors");
  const summary = root.querySelector("#recommendation");
  const explorer = root.querySelector("#explorer");
  if (banner) banner.innerHTML = renderBanner(state);
  if (errors) errors.innerHTML = renderFieldErrors(state);
  if (summary) summary.innerHTML = renderRecommendation(state);
  if (explorer) explorer.innerHTML = renderExplorer(state);
}
