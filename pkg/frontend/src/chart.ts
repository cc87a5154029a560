/** Inline SVG line chart of prior probabilities across EM iterations. */

import type { TraceStep } from "./types.js";

const WIDTH = 460;
const HEIGHT = 180;
const PAD = 28;
const COLORS = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed",
                "#0891b2", "#be185d", "#4d7c0f"];

interface Series {
  label: string;
  points: number[];
}

/** Track the most probable cells of the final iteration backwards. */
export function traceSeries(trace: TraceStep[], perGroup = 3): Series[] {
  if (trace.length === 0) {
    return [];
  }
  const last = trace[trace.length - 1]!.priors;
  const series: Series[] = [];
  const groups: ["functions" | "targets" | "restrictions", string][] = [];
  for (const group of ["functions", "targets", "restrictions"] as const) {
    const ranked = Object.entries(last[group])
      .sort((a, b) => b[1] - a[1])
      .slice(0, perGroup);
    for (const [key] of ranked) {
      groups.push([group, key]);
    }
  }
  for (const [group, key] of groups) {
    series.push({
      label: `${group.slice(0, 1)}:${key}`,
      points: trace.map((step) => step.priors[group][key] ?? 0),
    });
  }
  return series;
}

function polyline(points: number[], iterations: number, color: string): string {
  const xs = points.map((p, i) => {
    const x = PAD + (i / Math.max(1, iterations - 1)) * (WIDTH - 2 * PAD);
    const y = HEIGHT - PAD - p * (HEIGHT - 2 * PAD);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  return `<polyline fill="none" stroke="${color}" stroke-width="1.5" `
    + `points="${xs.join(" ")}" />`;
}

export function renderPriorsChart(trace: TraceStep[]): string {
  const series = traceSeries(trace);
  if (series.length === 0) {
    return `<p class="chart-empty">no iterations recorded</p>`;
  }
  const iterations = trace.length;
  const lines = series
    .map((s, i) => polyline(s.points, iterations, COLORS[i % COLORS.length]!))
    .join("\n");
  const legend = series
    .map((s, i) => `<span class="legend-entry" style="color: ${
      COLORS[i % COLORS.length]}">&#9644; ${s.label}</span>`)
    .join(" ");
  const axis = `<line x1="${PAD}" y1="${HEIGHT - PAD}" x2="${WIDTH - PAD}" `
    + `y2="${HEIGHT - PAD}" stroke="#999" />`
    + `<line x1="${PAD}" y1="${PAD}" x2="${PAD}" y2="${HEIGHT - PAD}" stroke="#999" />`;
  return `<figure class="priors-chart">
<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="prior probabilities by iteration">
${axis}
${lines}
</svg>
<figcaption>${legend}</figcaption>
</figure>`;
}
