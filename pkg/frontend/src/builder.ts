/** Query-builder selection state: one function, one target, predicates
 * with pairwise-distinct columns (mirrors the server-side candidate
 * invariant so invalid submissions are rejected client-side). */

import type {
  CandidateDescriptor,
  PredicateChoice,
  PredicateDescriptor,
} from "./types.js";

export interface BuilderSelection {
  func: string | null;
  target: string | null;
  predicates: PredicateDescriptor[];
}

export function emptySelection(): BuilderSelection {
  return { func: null, target: null, predicates: [] };
}

export function selectFunction(sel: BuilderSelection, func: string): BuilderSelection {
  return { ...sel, func: sel.func === func ? null : func };
}

export function selectTarget(sel: BuilderSelection, target: string): BuilderSelection {
  return { ...sel, target: sel.target === target ? null : target };
}

export interface ToggleResult {
  selection: BuilderSelection;
  error?: string;
}

function sameColumn(a: PredicateDescriptor, b: PredicateDescriptor): boolean {
  return a.table === b.table && a.column === b.column;
}

function samePredicate(a: PredicateDescriptor, b: PredicateDescriptor): boolean {
  return sameColumn(a, b) && String(a.literal) === String(b.literal);
}

export function togglePredicate(
  sel: BuilderSelection,
  predicate: PredicateChoice,
  maxPredicates = 3,
): ToggleResult {
  const desc: PredicateDescriptor = {
    table: predicate.table,
    column: predicate.column,
    literal: predicate.literal,
  };
  const existing = sel.predicates.findIndex((p) => samePredicate(p, desc));
  if (existing >= 0) {
    const predicates = sel.predicates.filter((_, i) => i !== existing);
    return { selection: { ...sel, predicates } };
  }
  if (sel.predicates.some((p) => sameColumn(p, desc))) {
    return {
      selection: sel,
      error: `only one predicate per column (${predicate.table}.${predicate.column})`,
    };
  }
  if (sel.predicates.length >= maxPredicates) {
    return { selection: sel, error: `at most ${maxPredicates} predicates` };
  }
  return { selection: { ...sel, predicates: [...sel.predicates, desc] } };
}

export function validateSelection(sel: BuilderSelection): string | null {
  if (!sel.func) {
    return "pick an aggregation function";
  }
  if (!sel.target) {
    return "pick an aggregation target";
  }
  if (sel.func === "conditional_probability" && sel.predicates.length === 0) {
    return "conditional probability needs at least one predicate";
  }
  return null;
}

export function toDescriptor(sel: BuilderSelection): CandidateDescriptor {
  const error = validateSelection(sel);
  if (error) {
    throw new Error(error);
  }
  return {
    function: sel.func as string,
    target: sel.target as string,
    predicates: sel.predicates,
  };
}
