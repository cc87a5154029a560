/** Wire types for the verification service API. */

export type RunStatus = "pending" | "running" | "done" | "failed";
export type ClaimStatus = "verified" | "flagged" | "nocandidate";
export type Outcome = "match" | "mismatch" | "novalue";

export interface TopCandidate {
  sql: string;
  nl: string;
  probability: number;
  value: number | null;
  outcome: Outcome;
}

export interface ClaimSpan {
  sentence: number;
  start: number;
  end: number;
  text: string;
}

export interface ClaimReport {
  id: number;
  status: ClaimStatus;
  value: number;
  span: ClaimSpan;
  correctness_probability: number;
  best_value: number | null;
  pinned: boolean;
  top_k: TopCandidate[];
}

export interface PriorsSnapshot {
  functions: Record<string, number>;
  targets: Record<string, number>;
  restrictions: Record<string, number>;
}

export interface TraceStep {
  iteration: number;
  delta: number;
  priors: PriorsSnapshot;
  top1: Record<string, string | null>;
}

export interface Report {
  dataset_id: string;
  document_id: string;
  claims: ClaimReport[];
  priors_trace: TraceStep[];
  stats: Record<string, unknown>;
}

export interface RunPayload {
  run_id: string;
  status: RunStatus;
  dataset_id: string;
  document_id: string;
  report?: Report;
  error?: string;
  pins?: Record<string, CandidateDescriptor>;
  removed?: number[];
  progress?: Record<string, string | number>;
}

export interface PredicateDescriptor {
  table: string;
  column: string;
  literal: string | number;
}

export interface CandidateDescriptor {
  function: string;
  target: string;
  predicates: PredicateDescriptor[];
}

export interface CandidateEntry extends TopCandidate {
  index: number;
  descriptor: CandidateDescriptor | null;
}

export interface FragmentChoice {
  marginal: number;
}

export interface FunctionChoice extends FragmentChoice {
  function: string;
}

export interface TargetChoice extends FragmentChoice {
  target: string;
}

export interface PredicateChoice extends FragmentChoice {
  table: string;
  column: string;
  literal: string | number;
}

export interface ClaimFragments {
  claim_id: number;
  functions: FunctionChoice[];
  targets: TargetChoice[];
  predicates: PredicateChoice[];
}

export type Feedback =
  | { select: number }
  | { custom: CandidateDescriptor }
  | { not_a_claim: true };
