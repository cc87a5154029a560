/** Pure HTML renderers: every view is a string function of API data, so
 * the document reconstructs identically from GET /runs after a reload. */

import type { BuilderSelection } from "./builder.js";
import type {
  CandidateEntry,
  ClaimFragments,
  ClaimReport,
  Report,
  RunPayload,
} from "./types.js";
import { renderPriorsChart } from "./chart.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#x27;");
}

/** Claim spans arrive with data-probability; inject the opacity so the
 * color strength tracks the correctness probability. */
export function decorateClaimSpans(html: string): string {
  return html.replace(
    /<span ([^>]*data-probability="([0-9.]+)"[^>]*)>/g,
    (_whole, attrs: string, probability: string) => {
      const p = Math.max(0.25, Math.min(1, Number(probability)));
      return `<span ${attrs} style="--claim-alpha: ${p.toFixed(3)}">`;
    },
  );
}

function formatValue(value: number | null): string {
  if (value === null) {
    return "no value";
  }
  return Number.isInteger(value) ? String(value) : value.toFixed(3);
}

function statusBadge(claim: ClaimReport): string {
  const pin = claim.pinned ? " &#x1f4cc;" : "";
  return `<span class="badge ${claim.status}">${claim.status}${pin}</span>`;
}

export function renderDocumentView(annotatedHtml: string): string {
  return `<section class="document" id="document-view">
${decorateClaimSpans(annotatedHtml)}
</section>`;
}

export function renderClaimList(report: Report, selected: number | null): string {
  const rows = report.claims
    .map((claim) => {
      const active = claim.id === selected ? " active" : "";
      const top = claim.top_k[0];
      const hint = top ? escapeHtml(top.nl) : "no candidates";
      return `<li class="claim-row${active}" data-claim-id="${claim.id}">
  <span class="claim-text">&ldquo;${escapeHtml(claim.span.text)}&rdquo;</span>
  ${statusBadge(claim)}
  <span class="claim-prob" title="correctness probability">
    ${(claim.correctness_probability * 100).toFixed(1)}%</span>
  <span class="claim-hint">${hint} = ${formatValue(top ? top.value : null)}</span>
</li>`;
    })
    .join("\n");
  return `<ul class="claim-list">${rows}</ul>`;
}

export function renderCandidatePicker(claimId: number,
                                      candidates: CandidateEntry[]): string {
  const rows = candidates
    .map((entry) => `<li class="candidate ${entry.outcome}">
  <button data-select-candidate="${entry.index}" data-claim-id="${claimId}">select</button>
  <span class="candidate-nl">${escapeHtml(entry.nl)}</span>
  <code class="candidate-sql">${escapeHtml(entry.sql)}</code>
  <span class="candidate-value">= ${formatValue(entry.value)}</span>
  <span class="candidate-prob">${(entry.probability * 100).toFixed(1)}%</span>
</li>`)
    .join("\n");
  return `<section class="picker" data-claim-id="${claimId}">
<h3>Most likely queries</h3>
<ol>${rows}</ol>
<button class="danger" data-not-a-claim="${claimId}">not a claim</button>
</section>`;
}

function builderEntry(attr: string, value: string, label: string,
                      marginal: number, active: boolean): string {
  return `<li><button data-${attr}="${escapeHtml(value)}"
  class="${active ? "active" : ""}">${escapeHtml(label)}
  <span class="marginal">${(marginal * 100).toFixed(1)}%</span></button></li>`;
}

export function renderBuilder(fragments: ClaimFragments,
                              selection: BuilderSelection,
                              error: string | null = null): string {
  const functions = fragments.functions
    .map((f) => builderEntry("pick-function", f.function, f.function,
                             f.marginal, selection.func === f.function))
    .join("");
  const targets = fragments.targets
    .map((t) => builderEntry("pick-target", t.target, t.target,
                             t.marginal, selection.target === t.target))
    .join("");
  const predicates = fragments.predicates
    .map((p) => {
      const key = `${p.table}.${p.column}=${p.literal}`;
      const active = selection.predicates.some(
        (sel) => sel.table === p.table && sel.column === p.column
          && String(sel.literal) === String(p.literal));
      return builderEntry("pick-predicate", key,
                          `${p.column} = ${p.literal}`, p.marginal, active);
    })
    .join("");
  return `<section class="builder" data-claim-id="${fragments.claim_id}">
<h3>Build the query yourself</h3>
<div class="builder-columns">
  <div><h4>function</h4><ul>${functions}</ul></div>
  <div><h4>target</h4><ul>${targets}</ul></div>
  <div><h4>predicates</h4><ul>${predicates}</ul></div>
</div>
${error ? `<p class="builder-error">${escapeHtml(error)}</p>` : ""}
<button data-submit-builder="${fragments.claim_id}">submit query</button>
</section>`;
}

export function renderDiagnostics(report: Report): string {
  return `<section class="diagnostics">
<h3>Priors per iteration</h3>
${renderPriorsChart(report.priors_trace)}
</section>`;
}

export function renderRunStatus(payload: RunPayload): string {
  const counters = Object.entries(payload.progress ?? {})
    .map(([key, value]) => `${escapeHtml(key)}=${escapeHtml(String(value))}`)
    .join(" ");
  return `<p class="run-status status-${payload.status}">
run ${payload.run_id}: ${payload.status}${counters ? ` (${counters})` : ""}</p>`;
}

export function renderSummary(report: Report): string {
  const counts = { verified: 0, flagged: 0, nocandidate: 0 };
  for (const claim of report.claims) {
    counts[claim.status] += 1;
  }
  return `<p class="summary">${report.claims.length} claims:
<span class="badge verified">${counts.verified} verified</span>
<span class="badge flagged">${counts.flagged} flagged</span>
<span class="badge nocandidate">${counts.nocandidate} without candidates</span></p>`;
}
