/** Application state: everything derives from API responses, so any
 * state can be rebuilt from a run id alone. */

import type { ApiClient } from "./api.js";
import { pollRun } from "./poll.js";
import type { BuilderSelection } from "./builder.js";
import { emptySelection } from "./builder.js";
import type {
  CandidateEntry,
  ClaimFragments,
  Feedback,
  RunPayload,
} from "./types.js";

export type Phase = "upload" | "processing" | "review";

export interface AppState {
  phase: Phase;
  runId: string | null;
  run: RunPayload | null;
  documentHtml: string;
  selectedClaim: number | null;
  candidates: CandidateEntry[];
  fragments: ClaimFragments | null;
  builder: BuilderSelection;
  builderError: string | null;
  message: string | null;
}

export function initialState(): AppState {
  return {
    phase: "upload",
    runId: null,
    run: null,
    documentHtml: "",
    selectedClaim: null,
    candidates: [],
    fragments: null,
    builder: emptySelection(),
    builderError: null,
    message: null,
  };
}

/** Load one run's full review state from the API (used after processing
 * finishes and after a page reload with a remembered run id). */
export async function loadRun(client: ApiClient, runId: string,
                              onUpdate?: (payload: RunPayload) => void): Promise<AppState> {
  const payload = await pollRun(client, runId, { onTick: onUpdate });
  const documentHtml = await client.getDocumentView(runId);
  return {
    ...initialState(),
    phase: "review",
    runId,
    run: payload,
    documentHtml,
  };
}

export async function openClaim(client: ApiClient, state: AppState,
                                claimId: number): Promise<AppState> {
  if (!state.runId) {
    return state;
  }
  const [candidates, fragments] = await Promise.all([
    client.getCandidates(state.runId, claimId, 5),
    client.getFragments(state.runId, claimId),
  ]);
  return {
    ...state,
    selectedClaim: claimId,
    candidates,
    fragments,
    builder: emptySelection(),
    builderError: null,
  };
}

/** Send feedback and swap to the successor run: no optimistic updates,
 * every mutation waits for the new run to finish. */
export async function submitFeedback(client: ApiClient, state: AppState,
                                     claimId: number, feedback: Feedback,
                                     onUpdate?: (payload: RunPayload) => void): Promise<AppState> {
  if (!state.runId) {
    return state;
  }
  const successor = await client.sendFeedback(state.runId, claimId, feedback);
  const next = await loadRun(client, successor, onUpdate);
  return { ...next, message: `run ${successor} replaces ${state.runId}` };
}
