"""Probabilistic claim-to-query inference via expectation maximization.

Document-level priors describe how likely each aggregation function,
aggregation target and restricted column is across the whole document.
Each claim's posterior over candidates combines those priors with its
keyword relevance scores and with evaluation outcomes, and the priors
are re-estimated from the per-claim maximum-likelihood queries until
they converge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cube import MATCH
from .errors import MissingScoreError
from .fragments import (
    CATEGORY_FUNCTION,
    CATEGORY_PREDICATE,
    CATEGORY_TARGET,
    RelevanceRow,
)
from .queries import (
    AGG_FUNCTIONS,
    AggColumnFragment,
    AggFunction,
    FunctionFragment,
    QueryCandidate,
)

PRIOR_FLOOR = 1e-3

ColumnKey = tuple[str, str]


@dataclass
class Priors:
    p_f: dict[AggFunction, float]
    p_a: dict[AggColumnFragment, float]
    p_r: dict[ColumnKey, float]

    def linf_delta(self, other: "Priors") -> float:
        delta = 0.0
        for key in self.p_f:
            delta = max(delta, abs(self.p_f[key] - other.p_f.get(key, 0.0)))
        for key in self.p_a:
            delta = max(delta, abs(self.p_a[key] - other.p_a.get(key, 0.0)))
        for key in self.p_r:
            delta = max(delta, abs(self.p_r[key] - other.p_r.get(key, 0.0)))
        return delta

    def as_dict(self) -> dict:
        return {
            "functions": {f.value: p for f, p in self.p_f.items()},
            "targets": {
                ("*" if t.is_star else f"{t.table}.{t.column}"): p
                for t, p in self.p_a.items()
            },
            "restrictions": {f"{t}.{c}": p for (t, c), p in self.p_r.items()},
        }


@dataclass
class ClaimDistribution:
    entries: list[tuple[QueryCandidate, float]]  # sorted descending
    all_zero: bool = False
    pinned: bool = False

    @property
    def ml_query(self) -> QueryCandidate | None:
        return self.entries[0][0] if self.entries else None

    def probability_of(self, candidate: QueryCandidate) -> float:
        for cand, p in self.entries:
            if cand == candidate:
                return p
        return 0.0


@dataclass
class EMTrace:
    iterations: list[dict] = field(default_factory=list)

    def record(self, iteration: int, priors: Priors, delta: float,
               distributions: dict[int, ClaimDistribution], render) -> None:
        self.iterations.append({
            "iteration": iteration,
            "delta": delta,
            "priors": priors.as_dict(),
            "top1": {
                str(cid): (render(d.ml_query) if d.ml_query else None)
                for cid, d in sorted(distributions.items())
            },
        })


def init_uniform_priors(targets: list[AggColumnFragment],
                        restrict_columns: list[ColumnKey]) -> Priors:
    """Uniform starting point: functions and targets share mass evenly;
    each restrictable column starts at 1/(number of restrictable columns)."""
    n_f = len(AGG_FUNCTIONS)
    p_f = {f: 1.0 / n_f for f in AGG_FUNCTIONS}
    p_a = {t: 1.0 / len(targets) for t in targets} if targets else {}
    p_r = {c: 1.0 / len(restrict_columns) for c in restrict_columns}
    return Priors(p_f=p_f, p_a=p_a, p_r=p_r)


def candidate_weight(candidate: QueryCandidate, relevance: RelevanceRow,
                     priors: Priors, outcome: str | None,
                     p_true: float) -> float:
    """Unnormalized posterior weight of one candidate.

    Product of three blocks: the document priors for the candidate's
    characteristics, the raw keyword relevance scores of its fragments,
    and the evaluation factor (p_true on a match, 1-p_true otherwise;
    a missing evaluation value counts as a mismatch).
    """
    func_score = relevance.score(CATEGORY_FUNCTION, FunctionFragment(candidate.func))
    target_score = relevance.score(CATEGORY_TARGET, candidate.target)
    if func_score is None:
        raise MissingScoreError(
            f"no relevance score for function {candidate.func.value}")
    if target_score is None:
        raise MissingScoreError(
            f"no relevance score for target {candidate.target}")

    weight = priors.p_f[candidate.func] * priors.p_a[candidate.target]
    weight *= func_score * target_score
    for pred in candidate.predicates:
        col = pred.column_key
        if col not in priors.p_r:
            raise MissingScoreError(f"no restriction prior for column {col}")
        score = relevance.score(CATEGORY_PREDICATE, pred)
        if score is None:
            raise MissingScoreError(f"no relevance score for predicate {pred}")
        weight *= priors.p_r[col] * score

    weight *= p_true if outcome == MATCH else (1.0 - p_true)
    return weight


def e_step(per_claim_candidates: dict[int, list[QueryCandidate]],
           relevance: dict[int, RelevanceRow],
           priors: Priors,
           outcomes: dict[int, dict[QueryCandidate, str]],
           p_true: float,
           pins: dict[int, QueryCandidate] | None = None) -> dict[int, ClaimDistribution]:
    """Normalize candidate weights into per-claim distributions.

    Pinned claims collapse to a point mass; a claim whose weights are all
    zero falls back to uniform with a diagnostic flag.
    """
    pins = pins or {}
    distributions: dict[int, ClaimDistribution] = {}
    for claim_id, candidates in per_claim_candidates.items():
        if claim_id in pins:
            pinned = pins[claim_id]
            entries = [(pinned, 1.0)]
            distributions[claim_id] = ClaimDistribution(entries=entries, pinned=True)
            continue
        claim_outcomes = outcomes.get(claim_id, {})
        row = relevance[claim_id]
        weights = [
            candidate_weight(c, row, priors, claim_outcomes.get(c), p_true)
            for c in candidates
        ]
        total = sum(weights)
        if total <= 0.0:
            n = len(candidates)
            entries = [(c, 1.0 / n) for c in candidates] if n else []
            distributions[claim_id] = ClaimDistribution(entries=entries, all_zero=True)
            continue
        probs = [w / total for w in weights]
        order = sorted(range(len(candidates)), key=lambda i: (-probs[i], i))
        entries = [(candidates[i], probs[i]) for i in order]
        distributions[claim_id] = ClaimDistribution(entries=entries)
    return distributions


def m_step(distributions: dict[int, ClaimDistribution], n_claims: int,
           template: Priors, floor: float = PRIOR_FLOOR) -> Priors:
    """Re-estimate priors from the maximum-likelihood query of each claim.

    Function and target shares renormalize to 1; restriction shares stay
    plain ratios per column. Zero cells are floored to keep every state
    reachable in later iterations.
    """
    f_counts = {f: 0 for f in template.p_f}
    a_counts = {t: 0 for t in template.p_a}
    r_counts = {c: 0 for c in template.p_r}
    for dist in distributions.values():
        ml = dist.ml_query
        if ml is None:
            continue
        if ml.func in f_counts:
            f_counts[ml.func] += 1
        if ml.target in a_counts:
            a_counts[ml.target] += 1
        for pred in ml.predicates:
            if pred.column_key in r_counts:
                r_counts[pred.column_key] += 1

    n = max(1, n_claims)

    def renormalized(counts: dict) -> dict:
        raw = {k: max(v / n, floor) for k, v in counts.items()}
        total = sum(raw.values())
        return {k: v / total for k, v in raw.items()}

    p_f = renormalized(f_counts)
    p_a = renormalized(a_counts)
    p_r = {c: min(1.0, max(v / n, floor)) for c, v in r_counts.items()}
    return Priors(p_f=p_f, p_a=p_a, p_r=p_r)


@dataclass
class EMResult:
    distributions: dict[int, ClaimDistribution]
    priors: Priors
    trace: EMTrace
    iterations: int
    converged: bool


def run_em(per_claim_candidates: dict[int, list[QueryCandidate]],
           relevance: dict[int, RelevanceRow],
           evaluate,  # () -> outcomes per claim (cube engine closure)
           targets: list[AggColumnFragment],
           restrict_columns: list[ColumnKey],
           p_true: float = 0.999,
           max_iterations: int = 20,
           tolerance: float = 1e-6,
           pins: dict[int, QueryCandidate] | None = None,
           render=str) -> EMResult:
    """Alternate evaluation-refined expectation and maximization steps
    until the prior vector moves less than the tolerance."""
    priors = init_uniform_priors(targets, restrict_columns)
    trace = EMTrace()
    distributions: dict[int, ClaimDistribution] = {}
    n_claims = len(per_claim_candidates)
    converged = False
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        outcomes = evaluate()
        distributions = e_step(per_claim_candidates, relevance, priors,
                               outcomes, p_true, pins)
        new_priors = m_step(distributions, n_claims, priors)
        delta = new_priors.linf_delta(priors)
        priors = new_priors
        trace.record(iteration, priors, delta, distributions, render)
        if delta < tolerance:
            converged = True
            break
    return EMResult(distributions=distributions, priors=priors, trace=trace,
                    iterations=iteration, converged=converged)
