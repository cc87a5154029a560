"""Cube-based evaluation of candidate queries with merging and caching.

One cube scan computes, for a set of dimension columns, every requested
aggregate for every combination of kept literals (others collapse to a
DEFAULT sentinel) including the no-restriction '*' patterns. A single
scan therefore answers many candidate queries at once; results are cached
by (function, target, dimension set) and reused across claims and
expectation-maximization iterations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .dataset import JoinPlan, Schema
from .errors import (
    BudgetTooSmallError,
    NotCoveredError,
    TypeMismatchError,
)
from .queries import (
    AggFunction,
    AggColumnFragment,
    QueryCandidate,
    RoundingRule,
    STAR,
    round_matches,
)


class _Sentinel:
    __slots__ = ("_name",)

    def __init__(self, name: str):
        self._name = name

    def __repr__(self):
        return self._name


DEFAULT = _Sentinel("DEFAULT")  # literal outside the kept set / missing cell
ANY = _Sentinel("ANY")  # the '*' no-restriction marker in cube assignments
NO_VALUE = _Sentinel("NO_VALUE")  # empty-group aggregate

MATCH = "match"
MISMATCH = "mismatch"
NOVALUE = "novalue"

ColumnKey = tuple[str, str]


@dataclass(frozen=True)
class CubeKey:
    func: AggFunction  # basis function: never percentage/conditional
    target: AggColumnFragment
    dims: tuple[ColumnKey, ...]  # sorted


@dataclass(frozen=True)
class CostBudget:
    max_row_passes: int = 10_000_000

    def __post_init__(self):
        if self.max_row_passes <= 0:
            raise BudgetTooSmallError("budget must be positive")


@dataclass
class EvalScope:
    functions: tuple[AggFunction, ...]
    targets: tuple[AggColumnFragment, ...]
    restrict_columns: tuple[ColumnKey, ...]  # descending marginal order
    kept_literals: dict[ColumnKey, tuple]
    n_dims: int


@dataclass
class CubeResult:
    """Finalized aggregates keyed by dim assignment (kept literal, DEFAULT
    or ANY per dim, aligned with the CubeKey dims order).

    Physically sparse: assignments never observed aggregate to an empty
    group, so lookups default to 0 for counts and NO_VALUE otherwise.
    """
    key: CubeKey
    entries: dict[tuple, object]

    def value(self, assignment: tuple):
        if assignment in self.entries:
            return self.entries[assignment]
        if self.key.func in (AggFunction.COUNT, AggFunction.COUNT_DISTINCT):
            return 0
        return NO_VALUE


@dataclass
class ResultCache:
    results: dict[CubeKey, CubeResult] = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def get(self, key: CubeKey) -> CubeResult | None:
        found = self.results.get(key)
        if found is None:
            self.misses += 1
        else:
            self.hits += 1
        return found

    def put(self, key: CubeKey, result: CubeResult) -> None:
        self.results[key] = result


@dataclass
class EngineStats:
    cube_scans: int = 0
    cube_keys_computed: int = 0
    rows_scanned: int = 0


@dataclass
class JoinedView:
    """Columnar row view over the join of the scope's tables."""
    schema: Schema
    tables: tuple[str, ...]
    columns: dict[ColumnKey, list]
    row_count: int

    def values(self, column: ColumnKey) -> list:
        return self.columns[column]


def materialize_join(schema: Schema, plan: JoinPlan) -> JoinedView:
    """Hash-join the plan's tables into one transient columnar view."""
    first = plan.tables[0]
    base = schema.table(first)
    indices: dict[str, list[int]] = {first: list(range(base.row_count))}
    joined = {first}
    pending = list(plan.predicates)
    while pending:
        progress = False
        for fk in list(pending):
            if fk.from_table in joined and fk.to_table not in joined:
                old, new, old_col, new_col = fk.from_table, fk.to_table, fk.from_column, fk.to_column
            elif fk.to_table in joined and fk.from_table not in joined:
                old, new, old_col, new_col = fk.to_table, fk.from_table, fk.to_column, fk.from_column
            else:
                if fk.from_table in joined and fk.to_table in joined:
                    pending.remove(fk)
                    progress = True
                continue
            new_table = schema.table(new)
            index: dict[object, list[int]] = {}
            for row_i, v in enumerate(new_table.column(new_col).values):
                if v is not None:
                    index.setdefault(v, []).append(row_i)
            old_values = schema.table(old).column(old_col).values
            next_indices: dict[str, list[int]] = {t: [] for t in indices}
            next_indices[new] = []
            for pos in range(len(indices[old])):
                key = old_values[indices[old][pos]]
                for new_row in index.get(key, ()):
                    for t in indices:
                        next_indices[t].append(indices[t][pos])
                    next_indices[new].append(new_row)
            indices = next_indices
            joined.add(new)
            pending.remove(fk)
            progress = True
        if not progress:
            break

    row_count = len(next(iter(indices.values()))) if indices else 0
    columns: dict[ColumnKey, list] = {}
    for tname in plan.tables:
        table = schema.table(tname)
        rows = indices.get(tname, [])
        for col in table.columns:
            columns[(tname, col.name)] = [col.values[i] for i in rows]
    return JoinedView(schema=schema, tables=plan.tables, columns=columns,
                      row_count=row_count)


def in_or_default(values: list, kept) -> list:
    """Map cells outside the kept literal set (and missing cells) to DEFAULT."""
    kept_set = set(kept)
    return [v if (v is not None and v in kept_set) else DEFAULT for v in values]


def function_basis(func: AggFunction, target: AggColumnFragment):
    """Cube basis aggregate for a candidate function: share ratios read
    from plain count cubes."""
    if func in (AggFunction.PERCENTAGE, AggFunction.CONDITIONAL_PROBABILITY):
        return (AggFunction.COUNT, STAR)
    return (func, target)


def basis_pairs(scope: EvalScope, numeric_targets: frozenset):
    """Distinct (basis function, target) aggregates the scope requires."""
    pairs = []
    for func in scope.functions:
        for target in scope.targets:
            if func in (AggFunction.SUM, AggFunction.AVG,
                        AggFunction.MIN, AggFunction.MAX):
                if target.is_star or (target.table, target.column) not in numeric_targets:
                    continue
            pair = function_basis(func, target)
            if pair not in pairs:
                pairs.append(pair)
    return pairs


def _star_patterns(n: int):
    return list(itertools.product((False, True), repeat=n))


def compute_cube(view: JoinedView, dims: tuple[ColumnKey, ...],
                 kept: dict[ColumnKey, tuple],
                 aggregates: list[tuple[AggFunction, AggColumnFragment]],
                 stats: EngineStats | None = None) -> dict[CubeKey, CubeResult]:
    """One scan over the view computing every aggregate for every cube cell.

    Every row updates all 2^len(dims) star-patterns of its mapped dim
    tuple directly, so sums accumulate in plain row order and stay
    bit-identical to a naive sequential evaluation.
    """
    dims = tuple(dims)
    mapped = [in_or_default(view.values(d), kept.get(d, ())) for d in dims]
    target_cols: dict[AggColumnFragment, list | None] = {}
    for func, target in aggregates:
        if target in target_cols:
            continue
        if target.is_star:
            target_cols[target] = None
        else:
            col_key = (target.table, target.column)
            column = view.values(col_key)
            target_cols[target] = column
            if func in (AggFunction.SUM, AggFunction.AVG, AggFunction.MIN,
                        AggFunction.MAX):
                sample = next((v for v in column if v is not None), None)
                if sample is not None and not isinstance(sample, (int, float)):
                    raise TypeMismatchError(
                        f"numeric aggregate over text column {col_key}"
                    )

    patterns = _star_patterns(len(dims))
    # accumulators[assignment] = list aligned with aggregates
    accumulators: dict[tuple, list] = {}

    # kind codes hoist the per-update dispatch out of the hot loop
    K_COUNT_ROWS, K_COUNT_COL, K_DISTINCT_ROWS, K_DISTINCT_COL = 0, 1, 2, 3
    K_SUM_AVG, K_MIN, K_MAX = 4, 5, 6
    specs: list[tuple[int, list | None]] = []
    for func, target in aggregates:
        column = target_cols[target]
        if func is AggFunction.COUNT:
            specs.append((K_COUNT_ROWS if column is None else K_COUNT_COL, column))
        elif func is AggFunction.COUNT_DISTINCT:
            specs.append((K_DISTINCT_ROWS if column is None else K_DISTINCT_COL,
                          column))
        elif func in (AggFunction.SUM, AggFunction.AVG):
            specs.append((K_SUM_AVG, column))
        elif func is AggFunction.MIN:
            specs.append((K_MIN, column))
        else:
            specs.append((K_MAX, column))

    def new_acc():
        accs: list = []
        for kind, _column in specs:
            if kind in (K_COUNT_ROWS, K_COUNT_COL):
                accs.append(0)
            elif kind in (K_DISTINCT_ROWS, K_DISTINCT_COL):
                accs.append(set())
            elif kind == K_SUM_AVG:
                accs.append([0.0, 0])
            else:
                accs.append(None)
        return accs

    indexed_specs = list(enumerate(specs))
    n_dims = len(dims)
    for row in range(view.row_count):
        base = tuple(mapped[d][row] for d in range(n_dims))
        for pattern in patterns:
            assignment = tuple(
                ANY if star else base[i] for i, star in enumerate(pattern)
            )
            accs = accumulators.get(assignment)
            if accs is None:
                accs = new_acc()
                accumulators[assignment] = accs
            for a, (kind, column) in indexed_specs:
                if kind == K_COUNT_ROWS:
                    accs[a] += 1
                elif kind == K_COUNT_COL:
                    if column[row] is not None:
                        accs[a] += 1
                elif kind == K_DISTINCT_ROWS:
                    accs[a].add(row)
                elif kind == K_DISTINCT_COL:
                    v = column[row]
                    if v is not None:
                        accs[a].add(v)
                elif kind == K_SUM_AVG:
                    v = column[row]
                    if v is not None:
                        acc = accs[a]
                        acc[0] += v
                        acc[1] += 1
                elif kind == K_MIN:
                    v = column[row]
                    if v is not None:
                        cur = accs[a]
                        accs[a] = v if cur is None or v < cur else cur
                else:  # K_MAX
                    v = column[row]
                    if v is not None:
                        cur = accs[a]
                        accs[a] = v if cur is None or v > cur else cur

    if stats is not None:
        stats.cube_scans += 1
        stats.cube_keys_computed += len(aggregates)
        stats.rows_scanned += view.row_count

    results: dict[CubeKey, CubeResult] = {}
    for a, (func, target) in enumerate(aggregates):
        entries: dict[tuple, object] = {}
        for assignment, accs in accumulators.items():
            acc = accs[a]
            if func is AggFunction.COUNT:
                entries[assignment] = acc
            elif func is AggFunction.COUNT_DISTINCT:
                entries[assignment] = len(acc)
            elif func is AggFunction.SUM:
                entries[assignment] = acc[0] if acc[1] > 0 else NO_VALUE
            elif func is AggFunction.AVG:
                entries[assignment] = acc[0] / acc[1] if acc[1] > 0 else NO_VALUE
            else:
                entries[assignment] = acc if acc is not None else NO_VALUE
        key = CubeKey(func=func, target=target, dims=dims)
        results[key] = CubeResult(key=key, entries=entries)
    return results


def dump_cube_csv(cache: ResultCache) -> str:
    """Diagnostic CSV of every cached cube entry: function, target, one
    column per position of the dim assignment, and the value."""
    import csv as csv_mod
    import io

    buf = io.StringIO()
    writer = csv_mod.writer(buf)
    writer.writerow(["function", "target", "dims", "assignment", "value"])
    for key in sorted(cache.results,
                      key=lambda k: (k.func.value, str(k.target), k.dims)):
        result = cache.results[key]
        target = "*" if key.target.is_star else f"{key.target.table}.{key.target.column}"
        dims_label = ";".join(f"{t}.{c}" for t, c in key.dims)
        for assignment in sorted(result.entries, key=lambda a: tuple(map(str, a))):
            value = result.entries[assignment]
            cells = ";".join(
                "*" if part is ANY else ("DEFAULT" if part is DEFAULT else str(part))
                for part in assignment
            )
            writer.writerow([
                key.func.value, target, dims_label, cells,
                "" if value is NO_VALUE else value,
            ])
    return buf.getvalue()


def lookup_candidate(cache: ResultCache, candidate: QueryCandidate,
                     scope_dims_available: list[tuple[ColumnKey, ...]]):
    """Read one candidate's value from the cached cube results."""
    basis_func, basis_target = function_basis(candidate.func, candidate.target)
    pred_cols = set(candidate.predicate_columns())
    chosen: CubeKey | None = None
    for dims in scope_dims_available:
        if pred_cols <= set(dims):
            key = CubeKey(func=basis_func, target=basis_target, dims=dims)
            if key in cache.results:
                chosen = key
                break
    if chosen is None:
        raise NotCoveredError(
            f"no cube covers candidate {candidate.func.value} over "
            f"{sorted(pred_cols)}"
        )
    result = cache.results[chosen]
    by_col = {p.column_key: p.literal for p in candidate.predicates}
    assignment = tuple(by_col.get(d, ANY) for d in chosen.dims)

    if candidate.func in (AggFunction.PERCENTAGE,
                          AggFunction.CONDITIONAL_PROBABILITY):
        numerator = result.value(assignment)
        if candidate.func is AggFunction.PERCENTAGE:
            denom_assignment = tuple(ANY for _ in chosen.dims)
        else:
            first = candidate.predicates[0]
            denom_assignment = tuple(
                first.literal if d == first.column_key else ANY
                for d in chosen.dims
            )
        denominator = result.value(denom_assignment)
        if not denominator:
            return NO_VALUE
        return 100.0 * numerator / denominator
    return result.value(assignment)


def n_group_size(restrict_count: int, m_preds: int, rule: str = "min") -> int:
    """Cube dimension-subset size: min(m, x) by default; the 'literal'
    rule keeps max(m, x-1) instead."""
    if restrict_count == 0:
        return 0
    if rule == "literal":
        return min(restrict_count, max(m_preds, restrict_count - 1))
    return min(m_preds, restrict_count)


def dim_groups(scope: EvalScope) -> list[tuple[ColumnKey, ...]]:
    """All dimension-column groups the scope iterates, sorted per group."""
    cols = scope.restrict_columns
    size = scope.n_dims
    if size == 0:
        return [()]
    return [tuple(sorted(g)) for g in itertools.combinations(cols, size)]


def pick_scope(targets: list[AggColumnFragment],
               kept_literals: dict[ColumnKey, tuple],
               column_marginals: dict[ColumnKey, float],
               numeric_targets: frozenset,
               view_row_count: int,
               budget: CostBudget,
               m_preds: int = 3,
               ng_rule: str = "min") -> EvalScope:
    """Choose the evaluation scope under the cost budget.

    All eight functions and the '*' target are always in scope; restrict
    columns enter in descending max-marginal order until the estimated
    cost (cube keys x joined rows) would exceed the budget.
    """
    from .queries import AGG_FUNCTIONS

    if view_row_count > budget.max_row_passes:
        raise BudgetTooSmallError(
            f"one cube pass needs {view_row_count} row passes; "
            f"budget is {budget.max_row_passes}"
        )

    scoped_targets = list(targets)
    if STAR not in scoped_targets:
        scoped_targets.insert(0, STAR)

    ordered_cols = sorted(
        column_marginals,
        key=lambda c: (-column_marginals[c], c),
    )

    def cost(column_count: int) -> int:
        size = n_group_size(column_count, m_preds, ng_rule)
        groups = _comb(column_count, size) if column_count else 1
        probe = EvalScope(
            functions=AGG_FUNCTIONS,
            targets=tuple(scoped_targets),
            restrict_columns=tuple(ordered_cols[:column_count]),
            kept_literals={},
            n_dims=size,
        )
        keys = groups * len(basis_pairs(probe, numeric_targets))
        return keys * max(1, view_row_count)

    chosen = 0
    for count in range(1, len(ordered_cols) + 1):
        if cost(count) <= budget.max_row_passes:
            chosen = count
        else:
            break

    restrict = tuple(ordered_cols[:chosen])
    return EvalScope(
        functions=AGG_FUNCTIONS,
        targets=tuple(scoped_targets),
        restrict_columns=restrict,
        kept_literals={c: tuple(kept_literals.get(c, ())) for c in restrict},
        n_dims=n_group_size(len(restrict), m_preds, ng_rule),
    )


def _comb(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def refine_by_eval(per_claim_candidates: dict[int, list[QueryCandidate]],
                   claim_sites: dict[int, object],
                   view: JoinedView,
                   scope: EvalScope,
                   cache: ResultCache,
                   rounding: RoundingRule,
                   numeric_targets: frozenset,
                   stats: EngineStats) -> tuple[dict[int, dict[QueryCandidate, str]],
                                                dict[int, dict[QueryCandidate, object]]]:
    """Evaluate every scoped candidate and classify it against its claim.

    Per claim, iterates the scope's dimension groups; cube results come
    from the cache when present, otherwise one merged scan computes every
    missing aggregate for that group. Returns (outcomes, values).
    """
    groups = dim_groups(scope)
    pairs = basis_pairs(scope, numeric_targets)

    outcomes: dict[int, dict[QueryCandidate, str]] = {}
    values: dict[int, dict[QueryCandidate, object]] = {}
    for claim_id, candidates in sorted(per_claim_candidates.items()):
        claim = claim_sites[claim_id]
        for dims in groups:
            missing = []
            for func, target in pairs:
                key = CubeKey(func=func, target=target, dims=dims)
                if cache.get(key) is None:
                    missing.append((func, target))
            if missing:
                computed = compute_cube(view, dims, scope.kept_literals,
                                        missing, stats)
                for key, result in computed.items():
                    cache.put(key, result)

        claim_outcomes: dict[QueryCandidate, str] = {}
        claim_values: dict[QueryCandidate, object] = {}
        for cand in candidates:
            value = lookup_candidate(cache, cand, groups)
            claim_values[cand] = value
            if value is NO_VALUE:
                claim_outcomes[cand] = NOVALUE
            elif round_matches(value, claim, rounding):
                claim_outcomes[cand] = MATCH
            else:
                claim_outcomes[cand] = MISMATCH
        outcomes[claim_id] = claim_outcomes
        values[claim_id] = claim_values
    return outcomes, values
