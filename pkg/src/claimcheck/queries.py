"""Query candidates: enumeration, rounding-match semantics, rendering.

A candidate is one aggregation function applied to one aggregation target
('*' or a numeric column) over an equi-joined table set, restricted by a
conjunction of unary equality predicates (at most one per column). The
fragment identity types defined here are shared with the keyword index.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from .dataset import Schema, join_plan
from .errors import InputError


class AggFunction(enum.Enum):
    COUNT = "count"
    COUNT_DISTINCT = "count_distinct"
    SUM = "sum"
    AVG = "avg"
    MIN = "min"
    MAX = "max"
    PERCENTAGE = "percentage"
    CONDITIONAL_PROBABILITY = "conditional_probability"


AGG_FUNCTIONS = tuple(AggFunction)

# Functions whose target must be a numeric column.
NUMERIC_TARGET_FUNCS = frozenset(
    {AggFunction.SUM, AggFunction.AVG, AggFunction.MIN, AggFunction.MAX}
)


@dataclass(frozen=True)
class FunctionFragment:
    func: AggFunction


@dataclass(frozen=True)
class AggColumnFragment:
    table: str | None  # None for the '*' pseudo-column
    column: str  # '*' or a numeric column name

    @property
    def is_star(self) -> bool:
        return self.column == "*"


STAR = AggColumnFragment(table=None, column="*")


@dataclass(frozen=True)
class PredicateFragment:
    table: str
    column: str
    literal: object  # str for text columns, float for numeric columns

    @property
    def column_key(self) -> tuple[str, str]:
        return (self.table, self.column)


Fragment = FunctionFragment | AggColumnFragment | PredicateFragment


@dataclass(frozen=True)
class QueryCandidate:
    func: AggFunction
    target: AggColumnFragment
    predicates: tuple[PredicateFragment, ...]  # ordered; first = condition

    def predicate_columns(self) -> tuple[tuple[str, str], ...]:
        return tuple(p.column_key for p in self.predicates)


@dataclass(frozen=True)
class RoundingRule:
    mode: str = "any_sig_digits"  # or "claim_precision"

    def __post_init__(self):
        if self.mode not in ("any_sig_digits", "claim_precision"):
            raise InputError(f"unknown rounding mode {self.mode!r}")


MAX_SIG_DIGITS = 12  # beyond double-precision significance


def round_to_sig(value: float, digits: int) -> float:
    """Round half-away-from-zero to the given number of significant digits."""
    if value == 0:
        return 0.0
    d = Decimal(value)  # exact binary expansion
    shift = d.adjusted() - digits + 1
    q = d.scaleb(-shift).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(q.scaleb(shift))


def round_matches(result: float, claim, rule: RoundingRule) -> bool:
    """True when the result rounds to the claimed value under the rule.

    `claim` needs .claimed_value, .sig_digits and .exact_word attributes.
    Spelled-out integers additionally require the result to be within half
    a unit of the claimed integer.
    """
    claimed = claim.claimed_value
    if rule.mode == "claim_precision":
        ks = [max(1, min(MAX_SIG_DIGITS, claim.sig_digits))]
    else:
        ks = range(1, MAX_SIG_DIGITS + 1)
    matched = any(round_to_sig(result, k) == claimed for k in ks)
    if matched and claim.exact_word:
        return abs(result - claimed) < 0.5
    return matched


def target_allowed(func: AggFunction, target: AggColumnFragment,
                   numeric_targets: frozenset) -> bool:
    """Apply the per-function target typing rule."""
    if func in NUMERIC_TARGET_FUNCS:
        return not target.is_star and (target.table, target.column) in numeric_targets
    return True


def enumerate_candidates(functions, targets, predicates, pred_scores,
                         numeric_targets: frozenset, m_preds: int = 3):
    """Yield every candidate from the scoped fragments, deterministically.

    Predicate subsets range over sizes 0..m_preds with pairwise-distinct
    columns; within a candidate, predicates are ordered by descending
    relevance score (which fixes the conditional-probability condition),
    with the catalog order breaking ties.
    """
    catalog_order = {p: i for i, p in enumerate(predicates)}
    ordered_preds = sorted(
        predicates,
        key=lambda p: (-pred_scores.get(p, 0.0), catalog_order[p]),
    )
    subsets: list[tuple[PredicateFragment, ...]] = [()]
    for size in range(1, m_preds + 1):
        for combo in itertools.combinations(ordered_preds, size):
            cols = [p.column_key for p in combo]
            if len(set(cols)) == len(cols):
                subsets.append(combo)

    for func in functions:
        for target in targets:
            if not target_allowed(func, target, numeric_targets):
                continue
            for combo in subsets:
                if func is AggFunction.CONDITIONAL_PROBABILITY and not combo:
                    continue
                yield QueryCandidate(func=func, target=target, predicates=combo)


def _sql_literal(value) -> str:
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return format_number(value)


def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _column_ref(table: str | None, column: str, qualify: bool) -> str:
    if column == "*":
        return "*"
    if qualify and table:
        return f"{table}.{column}".lower()
    return column.lower()


def render_query_sql(candidate: QueryCandidate, schema: Schema,
                     default_tables: tuple[str, ...] | None = None) -> str:
    """Canonical SQL text: lowercase identifiers, candidate predicate order.

    A candidate that references no table at all (count over '*' without
    predicates) renders against `default_tables` (the evaluated relation)
    or, failing that, the whole schema.
    """
    needed = set()
    if candidate.target.table:
        needed.add(candidate.target.table)
    for p in candidate.predicates:
        needed.add(p.table)
    if not needed:
        needed = set(default_tables) if default_tables else \
            {t.name for t in schema.tables}
    plan = join_plan(schema, needed)
    qualify = len(plan.tables) > 1

    func = candidate.func
    target_ref = _column_ref(candidate.target.table, candidate.target.column, qualify)
    if func is AggFunction.COUNT_DISTINCT:
        select = f"count(distinct {target_ref})"
    else:
        select = f"{func.value}({target_ref})"

    join_preds = [
        f"{fk.from_table}.{fk.from_column} = {fk.to_table}.{fk.to_column}".lower()
        for fk in plan.predicates
    ]
    from_clause = ", ".join(t.lower() for t in plan.tables)

    where_parts = list(join_preds)
    for p in candidate.predicates:
        where_parts.append(
            f"{_column_ref(p.table, p.column, qualify)} = {_sql_literal(p.literal)}"
        )
    sql = f"select {select} from {from_clause}"
    if where_parts:
        sql += " where " + " and ".join(where_parts)
    return sql


FUNCTION_PHRASES = {
    AggFunction.COUNT: "the number",
    AggFunction.COUNT_DISTINCT: "the number of distinct values",
    AggFunction.SUM: "the sum",
    AggFunction.AVG: "the average",
    AggFunction.MIN: "the minimum",
    AggFunction.MAX: "the maximum",
    AggFunction.PERCENTAGE: "the percentage",
    AggFunction.CONDITIONAL_PROBABILITY: "the percentage",
}


def _nl_literal(value) -> str:
    if isinstance(value, str):
        return f"'{value}'"
    return format_number(value)


def render_query_nl(candidate: QueryCandidate) -> str:
    """Template English description of a candidate."""
    target = "rows" if candidate.target.is_star else candidate.target.column.lower()
    phrase = f"{FUNCTION_PHRASES[candidate.func]} of {target}"
    preds = [
        f"{p.column.lower()} is {_nl_literal(p.literal)}" for p in candidate.predicates
    ]
    if candidate.func is AggFunction.CONDITIONAL_PROBABILITY:
        condition, rest = preds[0], preds[1:]
        text = phrase
        if rest:
            text += " where " + " and ".join(rest)
        return f"{text} among rows where {condition}"
    if preds:
        return f"{phrase} where " + " and ".join(preds)
    return phrase


def canonical_equal(a: QueryCandidate, b: QueryCandidate) -> bool:
    """Equality up to predicate reordering; the conditional-probability
    condition (first predicate) must match positionally."""
    if a.func is not b.func or a.target != b.target:
        return False
    if len(a.predicates) != len(b.predicates):
        return False
    if a.func is AggFunction.CONDITIONAL_PROBABILITY:
        if not a.predicates or not b.predicates:
            return a.predicates == b.predicates
        if a.predicates[0] != b.predicates[0]:
            return False
        return _pred_multiset(a.predicates[1:]) == _pred_multiset(b.predicates[1:])
    return _pred_multiset(a.predicates) == _pred_multiset(b.predicates)


def _pred_multiset(preds) -> tuple:
    return tuple(sorted((p.table, p.column, str(p.literal)) for p in preds))


_SQL_RE = re.compile(
    r"^\s*select\s+(?P<func>[a-z_ ]+?)\s*\(\s*(?:distinct\s+)?(?P<target>[\w.*]+)\s*\)\s*"
    r"from\s+(?P<from>[\w.,\s]+?)\s*(?:where\s+(?P<where>.*))?$",
    re.IGNORECASE | re.DOTALL,
)

_FUNC_ALIASES = {
    "count": AggFunction.COUNT,
    "countdistinct": AggFunction.COUNT_DISTINCT,
    "count distinct": AggFunction.COUNT_DISTINCT,
    "count_distinct": AggFunction.COUNT_DISTINCT,
    "sum": AggFunction.SUM,
    "avg": AggFunction.AVG,
    "average": AggFunction.AVG,
    "min": AggFunction.MIN,
    "max": AggFunction.MAX,
    "percentage": AggFunction.PERCENTAGE,
    "conditionalprobability": AggFunction.CONDITIONAL_PROBABILITY,
    "conditional_probability": AggFunction.CONDITIONAL_PROBABILITY,
}


def parse_canonical_sql(sql: str, schema: Schema) -> QueryCandidate:
    """Parse ground-truth SQL of the simple-aggregate form into a candidate.

    Join predicates in the where clause (column = column) are ignored;
    they are derivable from the join plan.
    """
    # normalize count(distinct x) before the function-name lookup
    normalized = re.sub(r"count\s*\(\s*distinct\s+", "count_distinct(", sql,
                        flags=re.IGNORECASE)
    m = _SQL_RE.match(normalized.strip().rstrip(";"))
    if not m:
        raise InputError(f"cannot parse ground-truth sql: {sql!r}")
    func_name = re.sub(r"[^a-z_ ]", "", m.group("func").strip().lower())
    func = _FUNC_ALIASES.get(func_name.replace(" ", ""))
    if func is None:
        raise InputError(f"unknown aggregation function in: {sql!r}")

    target_text = m.group("target").strip().lower()
    if target_text == "*":
        target = STAR
    else:
        target = _resolve_column(target_text, schema, AggColumnFragment)

    predicates = []
    where = m.group("where")
    if where:
        for part in re.split(r"\s+and\s+", where, flags=re.IGNORECASE):
            part = part.strip()
            if not part:
                continue
            left, _, right = part.partition("=")
            left, right = left.strip().lower(), right.strip()
            if re.fullmatch(r"[\w.]+", right) and "." in right and not _is_number(right):
                continue  # join predicate column = column
            table, column = _split_column(left, schema)
            col = schema.table(table).column(column)
            if right.startswith("'") or right.startswith("`"):
                literal: object = right.strip("'`").replace("''", "'")
                if col.is_numeric:
                    parsed = _try_float(str(literal))
                    if parsed is not None:
                        literal = parsed
            else:
                literal = _try_float(right)
                if literal is None:
                    literal = right
            predicates.append(PredicateFragment(table=table, column=column, literal=literal))
    return QueryCandidate(func=func, target=target, predicates=tuple(predicates))


def _is_number(text: str) -> bool:
    return _try_float(text) is not None


def _try_float(text: str):
    try:
        return float(text)
    except ValueError:
        return None


def _split_column(ref: str, schema: Schema) -> tuple[str, str]:
    if "." in ref:
        table, column = ref.split(".", 1)
        real = _find_table(schema, table)
        if real is None:
            raise InputError(f"unknown table in ground truth: {table!r}")
        return real, _find_column(schema.table(real), column)
    for t in schema.tables:
        for c in t.columns:
            if c.name.lower() == ref:
                return t.name, c.name
    raise InputError(f"unknown column in ground truth: {ref!r}")


def _find_table(schema: Schema, name: str) -> str | None:
    for t in schema.tables:
        if t.name.lower() == name.lower():
            return t.name
    return None


def _find_column(table, name: str) -> str:
    for c in table.columns:
        if c.name.lower() == name.lower():
            return c.name
    raise InputError(f"unknown column {name!r} in table {table.name!r}")


def _resolve_column(ref: str, schema: Schema, cls):
    table, column = _split_column(ref, schema)
    return cls(table=table, column=column)
