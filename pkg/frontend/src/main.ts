/** DOM glue: event delegation over the pure view renderers. */

import { ApiClient } from "./api.js";
import {
  selectFunction,
  selectTarget,
  toDescriptor,
  togglePredicate,
  validateSelection,
} from "./builder.js";
import {
  initialState,
  loadRun,
  openClaim,
  submitFeedback,
  type AppState,
} from "./state.js";
import {
  renderBuilder,
  renderCandidatePicker,
  renderClaimList,
  renderDiagnostics,
  renderDocumentView,
  renderRunStatus,
  renderSummary,
} from "./views.js";

const client = new ApiClient("");
let state: AppState = initialState();

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

function render(): void {
  $("upload-panel").hidden = state.phase !== "upload";
  $("processing-panel").hidden = state.phase !== "processing";
  $("review-panel").hidden = state.phase !== "review";
  $("message").textContent = state.message ?? "";

  if (state.phase === "review" && state.run?.report) {
    $("summary").innerHTML = renderSummary(state.run.report);
    $("document-container").innerHTML = renderDocumentView(state.documentHtml);
    $("claims-container").innerHTML = renderClaimList(
      state.run.report, state.selectedClaim);
    const detail = $("claim-detail");
    if (state.selectedClaim !== null && state.fragments) {
      detail.innerHTML =
        renderCandidatePicker(state.selectedClaim, state.candidates)
        + renderBuilder(state.fragments, state.builder, state.builderError);
    } else {
      detail.innerHTML = "<p>select a claim to inspect its queries</p>";
    }
    $("diagnostics-container").innerHTML = renderDiagnostics(state.run.report);
  }
}

function setState(next: AppState): void {
  state = next;
  render();
}

function busy(message: string): void {
  setState({ ...state, message });
}

async function startVerification(): Promise<void> {
  const tableInput = $("csv-input") as HTMLInputElement;
  const docInput = $("doc-input") as HTMLInputElement;
  const dictInput = $("dict-input") as HTMLInputElement;
  const synInput = $("syn-input") as HTMLInputElement;
  const schemaInput = $("schema-input") as HTMLInputElement;
  if (!tableInput.files?.length || !docInput.files?.length) {
    busy("pick at least one CSV file and a document");
    return;
  }
  try {
    setState({ ...state, phase: "processing", message: "uploading" });
    const datasetId = await client.uploadDataset({
      tables: Array.from(tableInput.files).map((f) => ({ name: f.name, content: f })),
      dictionary: dictInput.files?.[0],
      synonyms: synInput.files?.[0],
      schema: schemaInput.files?.[0],
    });
    const documentId = await client.uploadDocument(docInput.files[0]!);
    const runId = await client.createRun(datasetId, documentId);
    $("run-progress").textContent = `run ${runId} started`;
    const next = await loadRun(client, runId, (payload) => {
      $("run-progress").innerHTML = renderRunStatus(payload);
    });
    setState(next);
  } catch (error) {
    setState({ ...state, phase: "upload", message: String(error) });
  }
}

async function handleReviewClick(event: Event): Promise<void> {
  const target = event.target as HTMLElement;
  const claimRow = target.closest<HTMLElement>("[data-claim-id].claim-row");
  try {
    if (claimRow?.dataset.claimId) {
      setState(await openClaim(client, state, Number(claimRow.dataset.claimId)));
      return;
    }
    const select = target.closest<HTMLElement>("[data-select-candidate]");
    if (select?.dataset.selectCandidate && select.dataset.claimId) {
      busy("pinning candidate, waiting for the successor run");
      setState(await submitFeedback(
        client, state, Number(select.dataset.claimId),
        { select: Number(select.dataset.selectCandidate) }));
      return;
    }
    const notAClaim = target.closest<HTMLElement>("[data-not-a-claim]");
    if (notAClaim?.dataset.notAClaim) {
      busy("removing claim, waiting for the successor run");
      setState(await submitFeedback(
        client, state, Number(notAClaim.dataset.notAClaim),
        { not_a_claim: true }));
      return;
    }
    const pickFunction = target.closest<HTMLElement>("[data-pick-function]");
    if (pickFunction?.dataset.pickFunction) {
      setState({
        ...state, builderError: null,
        builder: selectFunction(state.builder, pickFunction.dataset.pickFunction),
      });
      return;
    }
    const pickTarget = target.closest<HTMLElement>("[data-pick-target]");
    if (pickTarget?.dataset.pickTarget) {
      setState({
        ...state, builderError: null,
        builder: selectTarget(state.builder, pickTarget.dataset.pickTarget),
      });
      return;
    }
    const pickPredicate = target.closest<HTMLElement>("[data-pick-predicate]");
    if (pickPredicate?.dataset.pickPredicate && state.fragments) {
      const key = pickPredicate.dataset.pickPredicate;
      const choice = state.fragments.predicates.find(
        (p) => `${p.table}.${p.column}=${p.literal}` === key);
      if (choice) {
        const result = togglePredicate(state.builder, choice);
        setState({ ...state, builder: result.selection,
                   builderError: result.error ?? null });
      }
      return;
    }
    const submit = target.closest<HTMLElement>("[data-submit-builder]");
    if (submit?.dataset.submitBuilder) {
      const invalid = validateSelection(state.builder);
      if (invalid) {
        setState({ ...state, builderError: invalid });
        return;
      }
      busy("submitting custom query, waiting for the successor run");
      setState(await submitFeedback(
        client, state, Number(submit.dataset.submitBuilder),
        { custom: toDescriptor(state.builder) }));
      return;
    }
  } catch (error) {
    setState({ ...state, message: String(error) });
  }
}

export function boot(): void {
  $("start-button").addEventListener("click", () => {
    void startVerification();
  });
  $("review-panel").addEventListener("click", (event) => {
    void handleReviewClick(event);
  });
  render();
}

if (typeof document !== "undefined" && document.getElementById("upload-panel")) {
  boot();
}
