"""End-to-end verification pipeline.

Wires ingestion, fragment retrieval, candidate enumeration, cube
evaluation and expectation maximization into a single deterministic run
that produces a report plus the richer per-claim details the API serves.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from . import cube as engine
from .dataset import DataDictionary, Schema, join_plan
from .errors import DisconnectedError
from .fragments import (
    CATEGORY_FUNCTION,
    CATEGORY_PREDICATE,
    CATEGORY_TARGET,
    FragmentCatalog,
    FragmentIndex,
    RelevanceRow,
    SynonymProvider,
    build_catalog,
    build_index,
    retrieve,
)
from .inference import EMResult, run_em
from .queries import (
    AGG_FUNCTIONS,
    AggColumnFragment,
    FunctionFragment,
    PredicateFragment,
    QueryCandidate,
    RoundingRule,
    STAR,
    enumerate_candidates,
    render_query_nl,
    render_query_sql,
)
from .textdoc import ClaimSite, DistanceProvider, Document, claim_keywords, detect_claims
from .verdicts import Report, Verdict, assemble_verdicts

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerifyConfig:
    p_true: float = 0.999
    hits_k: int = 20
    m_preds: int = 3
    budget: int = 10_000_000
    rounding_mode: str = "any_sig_digits"  # any_sig_digits | claim_precision
    decision_rule: str = "top1"  # top1 | any
    max_iterations: int = 20
    tolerance: float = 1e-6
    context_anchor: str = "min"  # min | max
    ng_rule: str = "min"  # min | literal
    report_top_k: int = 20
    include_timings: bool = False


@dataclass
class DatasetBundle:
    schema: Schema
    dictionary: DataDictionary | None
    catalog: FragmentCatalog
    index: FragmentIndex


def load_dataset(tables, fks=None, dictionary: DataDictionary | None = None,
                 synonyms: SynonymProvider | None = None,
                 wordlist: set[str] | None = None) -> DatasetBundle:
    """Build the schema, fragment catalog and index for loaded tables."""
    from .dataset import build_schema

    schema = build_schema(list(tables), list(fks or []))
    catalog = build_catalog(schema, dictionary, synonyms, wordlist)
    index = build_index(catalog)
    return DatasetBundle(schema=schema, dictionary=dictionary,
                         catalog=catalog, index=index)


@dataclass
class ClaimScope:
    """Per-claim slice of the evaluation scope."""
    relevance: RelevanceRow  # augmented with mandatory fragments
    targets: list[AggColumnFragment]
    predicates: list[PredicateFragment]
    candidates: list[QueryCandidate] = field(default_factory=list)


def _augment_relevance(row: RelevanceRow) -> RelevanceRow:
    """Give every mandatory fragment (the eight functions, the '*' target)
    a score so scoped candidates never miss a relevance factor.

    Unretrieved mandatory fragments score half the category's minimum
    retrieved score (or a flat 1.0 when the category came back empty), so
    they never outrank genuine keyword matches and cancel out entirely
    when a category has no signal at all.
    """
    scores = {cat: dict(row.category(cat)) for cat in
              (CATEGORY_FUNCTION, CATEGORY_TARGET, CATEGORY_PREDICATE)}

    funcs = scores[CATEGORY_FUNCTION]
    floor = 0.5 * min(funcs.values()) if funcs else 1.0
    for f in AGG_FUNCTIONS:
        funcs.setdefault(FunctionFragment(f), floor)

    targets = scores[CATEGORY_TARGET]
    floor = 0.5 * min(targets.values()) if targets else 1.0
    targets.setdefault(STAR, floor)
    return RelevanceRow(scores=scores)


@dataclass
class RunArtifacts:
    report: Report
    document: Document
    claims: dict[int, ClaimSite]
    verdicts: list[Verdict]
    em: EMResult | None
    claim_scopes: dict[int, ClaimScope]
    marginals: dict[int, dict] = field(default_factory=dict)
    scope: engine.EvalScope | None = None
    cube_cache: engine.ResultCache | None = None


def _primary_component(schema: Schema, needed: set[str]) -> set[str]:
    """Largest-mass connected component when the needed tables are not
    mutually joinable; fragments outside it are dropped with a warning."""
    adjacency: dict[str, set[str]] = {t.name: set() for t in schema.tables}
    for fk in schema.fks:
        adjacency[fk.from_table].add(fk.to_table)
        adjacency[fk.to_table].add(fk.from_table)
    components: list[set[str]] = []
    unseen = {t.name for t in schema.tables}
    while unseen:
        start = sorted(unseen)[0]
        stack = [start]
        comp = {start}
        while stack:
            for nxt in adjacency[stack.pop()]:
                if nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        components.append(comp)
        unseen -= comp
    best = max(components, key=lambda c: (len(c & needed), -len(c), sorted(c)[0] == sorted(needed)[0]))
    dropped = needed - best
    if dropped:
        logger.warning("tables %s are not joinable with the primary component; "
                       "their fragments are out of scope", sorted(dropped))
    return best


def verify(bundle: DatasetBundle, doc: Document,
           dist: DistanceProvider | None = None,
           config: VerifyConfig = VerifyConfig(),
           pins: dict[int, QueryCandidate] | None = None,
           removed_claims: set[int] | None = None,
           dataset_id: str = "dataset",
           document_id: str = "document",
           progress=None) -> RunArtifacts:
    """Run the full verification pipeline over one document + dataset.

    `progress`, when given, receives counter dicts at milestones (claim
    detection, scope selection, each EM iteration).
    """
    start_time = time.monotonic()
    report_progress = progress or (lambda counters: None)
    dist = dist or DistanceProvider()
    pins = dict(pins or {})
    removed = set(removed_claims or ())
    schema = bundle.schema
    catalog = bundle.catalog
    rounding = RoundingRule(mode=config.rounding_mode)

    all_claims = detect_claims(doc)
    claims: dict[int, ClaimSite] = {
        i: c for i, c in enumerate(all_claims) if i not in removed
    }
    pins = {cid: cand for cid, cand in pins.items() if cid in claims}
    report_progress({"stage": "claims_detected", "claims": len(claims)})

    scopes: dict[int, ClaimScope] = {}
    for cid, claim in claims.items():
        keywords = claim_keywords(claim, doc, dist, config.context_anchor)
        row = retrieve(bundle.index, keywords, config.hits_k)
        augmented = _augment_relevance(row)
        targets = [STAR] + [
            t for t in augmented.category(CATEGORY_TARGET) if not t.is_star
        ]
        predicates = list(augmented.category(CATEGORY_PREDICATE))
        scopes[cid] = ClaimScope(relevance=augmented, targets=targets,
                                 predicates=predicates)

    # global evaluation scope inputs: union over claims plus pinned fragments
    kept: dict[tuple[str, str], list] = {}
    marginal: dict[tuple[str, str], float] = {}
    union_targets: list[AggColumnFragment] = [STAR]
    needed_tables: set[str] = set()
    for cid, scope in sorted(scopes.items()):
        for target in scope.targets:
            if not target.is_star:
                needed_tables.add(target.table)
                if target not in union_targets:
                    union_targets.append(target)
        for pred, score in scope.relevance.category(CATEGORY_PREDICATE).items():
            col = pred.column_key
            needed_tables.add(pred.table)
            kept.setdefault(col, [])
            if pred.literal not in kept[col]:
                kept[col].append(pred.literal)
            marginal[col] = max(marginal.get(col, 0.0), score)
    for cand in pins.values():
        if not cand.target.is_star:
            needed_tables.add(cand.target.table)
            if cand.target not in union_targets:
                union_targets.append(cand.target)
        for pred in cand.predicates:
            needed_tables.add(pred.table)
            kept.setdefault(pred.column_key, [])
            if pred.literal not in kept[pred.column_key]:
                kept[pred.column_key].append(pred.literal)
            marginal.setdefault(pred.column_key, 0.0)

    if not needed_tables:
        needed_tables = {t.name for t in schema.tables}
    try:
        plan = join_plan(schema, needed_tables)
    except DisconnectedError:
        component = _primary_component(schema, needed_tables)
        union_targets = [t for t in union_targets
                         if t.is_star or t.table in component]
        kept = {col: lit for col, lit in kept.items() if col[0] in component}
        marginal = {col: m for col, m in marginal.items() if col[0] in component}
        for scope in scopes.values():
            scope.targets = [t for t in scope.targets
                             if t.is_star or t.table in component]
            scope.predicates = [p for p in scope.predicates
                                if p.table in component]
        plan = join_plan(schema, needed_tables & component or component)

    view = engine.materialize_join(schema, plan)
    eval_scope = engine.pick_scope(
        targets=union_targets,
        kept_literals={c: tuple(v) for c, v in kept.items()},
        column_marginals=marginal,
        numeric_targets=catalog.numeric_targets,
        view_row_count=view.row_count,
        budget=engine.CostBudget(max_row_passes=config.budget),
        m_preds=config.m_preds,
        ng_rule=config.ng_rule,
    )
    # pinned predicate columns must stay evaluable even when the budget
    # squeezed them out of the learned scope
    pinned_cols = [p.column_key for cand in pins.values() for p in cand.predicates]
    missing_pinned = [c for c in pinned_cols if c not in eval_scope.restrict_columns]
    if missing_pinned:
        restrict = tuple(list(eval_scope.restrict_columns)
                         + sorted(set(missing_pinned)))
        eval_scope = engine.EvalScope(
            functions=eval_scope.functions,
            targets=eval_scope.targets,
            restrict_columns=restrict,
            kept_literals={c: tuple(kept.get(c, ())) for c in restrict},
            n_dims=engine.n_group_size(len(restrict), config.m_preds,
                                       config.ng_rule),
        )

    restrict_set = set(eval_scope.restrict_columns)
    scope_targets = set(eval_scope.targets)
    per_claim_candidates: dict[int, list[QueryCandidate]] = {}
    naive_candidates = 0
    for cid, scope in sorted(scopes.items()):
        targets = [t for t in scope.targets if t in scope_targets]
        predicates = [p for p in scope.predicates if p.column_key in restrict_set]
        pred_scores = scope.relevance.category(CATEGORY_PREDICATE)
        candidates = list(enumerate_candidates(
            functions=eval_scope.functions,
            targets=targets,
            predicates=predicates,
            pred_scores=pred_scores,
            numeric_targets=catalog.numeric_targets,
            m_preds=config.m_preds,
        ))
        pinned = pins.get(cid)
        if pinned is not None and pinned not in candidates:
            candidates.append(pinned)
        scope.candidates = candidates
        per_claim_candidates[cid] = candidates
        naive_candidates += len(candidates)

    report_progress({
        "stage": "scope_picked",
        "claims": len(claims),
        "candidates": naive_candidates,
        "restrict_columns": len(eval_scope.restrict_columns),
        "joined_rows": view.row_count,
    })

    cache = engine.ResultCache()
    stats = engine.EngineStats()
    outcome_state: dict = {"outcomes": {}, "values": {}, "iteration": 0}

    def evaluate():
        outcomes, values = engine.refine_by_eval(
            per_claim_candidates, claims, view, eval_scope, cache,
            rounding, catalog.numeric_targets, stats,
        )
        outcome_state["outcomes"] = outcomes
        outcome_state["values"] = values
        outcome_state["iteration"] += 1
        report_progress({
            "stage": "em_iteration",
            "iteration": outcome_state["iteration"],
            "claims": len(claims),
            "candidates": naive_candidates,
            "cube_scans": stats.cube_scans,
            "cache_hits": cache.hits,
        })
        return outcomes

    def sql(candidate: QueryCandidate) -> str:
        return render_query_sql(candidate, schema, default_tables=view.tables)

    em: EMResult | None = None
    if claims:
        em = run_em(
            per_claim_candidates=per_claim_candidates,
            relevance={cid: s.relevance for cid, s in scopes.items()},
            evaluate=evaluate,
            targets=list(eval_scope.targets),
            restrict_columns=list(eval_scope.restrict_columns),
            p_true=config.p_true,
            max_iterations=config.max_iterations,
            tolerance=config.tolerance,
            pins=pins,
            render=sql,
        )
        distributions = em.distributions
    else:
        distributions = {}

    verdicts = assemble_verdicts(
        claims=claims,
        doc=doc,
        distributions=distributions,
        outcomes=outcome_state["outcomes"],
        values=outcome_state["values"],
        render_sql=sql,
        render_nl=render_query_nl,
        top_k=config.report_top_k,
        decision_rule=config.decision_rule,
    )

    marginals = {
        cid: _fragment_marginals(distributions.get(cid))
        for cid in sorted(claims)
    }

    run_stats = {
        "claims": len(claims),
        "joined_rows": view.row_count,
        "naive_candidate_count": naive_candidates,
        "cube_scans": stats.cube_scans,
        "cube_keys_computed": stats.cube_keys_computed,
        "cache_hits": cache.hits,
        "cache_misses": cache.misses,
        "iterations": em.iterations if em else 0,
        "converged": em.converged if em else True,
        "elapsed_seconds": (
            round(time.monotonic() - start_time, 3)
            if config.include_timings else None
        ),
    }
    report = Report(
        dataset_id=dataset_id,
        document_id=document_id,
        verdicts=verdicts,
        priors_trace=em.trace.iterations if em else [],
        stats=run_stats,
    )
    return RunArtifacts(
        report=report,
        document=doc,
        claims=claims,
        verdicts=verdicts,
        em=em,
        claim_scopes=scopes,
        marginals=marginals,
        scope=eval_scope,
        cube_cache=cache,
    )


def _fragment_marginals(distribution) -> dict:
    """Per-category fragment marginals for one claim's distribution."""
    if distribution is None:
        return {"functions": {}, "targets": {}, "predicates": {}}
    funcs: dict[str, float] = {}
    targets: dict[str, float] = {}
    preds: dict[str, float] = {}
    for cand, p in distribution.entries:
        fname = cand.func.value
        funcs[fname] = funcs.get(fname, 0.0) + p
        tname = "*" if cand.target.is_star else f"{cand.target.table}.{cand.target.column}"
        targets[tname] = targets.get(tname, 0.0) + p
        for pred in cand.predicates:
            key = f"{pred.table}.{pred.column}={pred.literal}"
            preds[key] = preds.get(key, 0.0) + p
    return {"functions": funcs, "targets": targets, "predicates": preds}
