/** SVG dose-explorer chart.
 *
 * The chart draws only values taken from service responses; coordinate
 * scaling is display geometry, never dose math. Axis extents come from the
 * response's own dose array.
 */

import type { CurveResponse, RecommendResponse } from "./types";

export const CHART = {
  width: 640,
  height: 280,
  padLeft: 42,
  padRight: 16,
  padTop: 14,
  padBottom: 30,
};

export function xFor(dose: number, doses: number[]): number {
  const lo = doses[0];
  const hi = doses[doses.length - 1];
  const span = hi - lo || 1;
  const inner = CHART.width - CHART.padLeft - CHART.padRight;
  return CHART.padLeft + ((dose - lo) / span) * inner;
}

function yFor(value: number, lo: number, hi: number): number {
  const span = hi - lo || 1;
  const inner = CHART.height - CHART.padTop - CHART.padBottom;
  return CHART.padTop + (1 - (value - lo) / span) * inner;
}

function polyline(doses: number[], values: number[], lo: number, hi: number): string {
  return values
    .map((v, i) => `${xFor(doses[i], doses).toFixed(2)},${yFor(v, lo, hi).toFixed(2)}`)
    .join(" ");
}

export function renderChartSvg(
  curve: CurveResponse,
  recommendation: RecommendResponse | null,
): string {
  const outcomesLo = 0;
  const outcomesHi = 10;
  const utilLo = Math.min(...curve.utility);
  const utilHi = Math.max(...curve.utility);
  const markerX = recommendation === null ? null : xFor(recommendation.dose_meq, curve.doses);

  const marker =
    markerX === null
      ? ""
      : `<line data-role="dose-marker" x1="${markerX.toFixed(2)}" x2="${markerX.toFixed(2)}"
           y1="${CHART.padTop}" y2="${CHART.height - CHART.padBottom}"
           stroke="#0a7d38" stroke-width="2" stroke-dasharray="5 3"/>`;

  return `
  <svg viewBox="0 0 ${CHART.width} ${CHART.height}" role="img"
       aria-label="dose response curves">
    <rect x="0" y="0" width="${CHART.width}" height="${CHART.height}" fill="#fcfcfa"/>
    <polyline data-role="pain-curve" fill="none" stroke="#b4432f" stroke-width="2"
      points="${polyline(curve.doses, curve.pain_hat, outcomesLo, outcomesHi)}"/>
    <polyline data-role="orade-curve" fill="none" stroke="#2f6cb4" stroke-width="2"
      points="${polyline(curve.doses, curve.orade_hat, outcomesLo, outcomesHi)}"/>
    <polyline data-role="utility-curve" fill="none" stroke="#6b6b6b" stroke-width="1.5"
      stroke-dasharray="2 3"
      points="${polyline(curve.doses, curve.utility, utilLo, utilHi)}"/>
    ${marker}
    <text x="${CHART.padLeft}" y="${CHART.height - 8}" font-size="11" fill="#444">
      ${curve.doses[0]} MEQ</text>
    <text x="${CHART.width - CHART.padRight - 48}" y="${CHART.height - 8}"
      font-size="11" fill="#444">${curve.doses[curve.doses.length - 1]} MEQ</text>
  </svg>`;
}
