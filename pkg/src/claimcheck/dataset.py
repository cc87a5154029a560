"""CSV loading, type inference, schema validation and join planning.

Tables are stored columnar: each column keeps an ordered list of cells
where None marks a missing value. A column is Numeric when every
non-empty cell parses as a plain decimal number (optional sign, comma
thousands separators, one decimal point); anything else makes it Text.
Loaded objects are immutable by convention and safe to share.
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import deque
from dataclasses import dataclass, field

from .errors import (
    CyclicSchemaError,
    DisconnectedError,
    DuplicateHeaderError,
    EmptyInputError,
    MalformedLineError,
    NonUniqueKeyError,
    RaggedRowError,
    UnknownColumnError,
    UnknownTableOrColumnError,
)

NUMERIC_RE = re.compile(r"^[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)?(?:\.\d+)?$")


def parse_numeric_cell(text: str) -> float | None:
    """Parse one cell as a decimal number, or None if it is not one.

    Accepts an optional sign and comma thousands separators; percent
    signs and currency symbols are NOT stripped (data cells stay literal).
    """
    text = text.strip()
    if not text or not NUMERIC_RE.match(text):
        return None
    stripped = text.replace(",", "")
    if stripped in ("", "+", "-", ".", "+.", "-."):
        return None
    try:
        value = float(stripped)
    except ValueError:
        return None
    if value != value or value in (float("inf"), float("-inf")):
        return None
    return value


@dataclass(frozen=True)
class Column:
    name: str
    ctype: str  # "numeric" | "text"
    values: tuple  # cells; None = missing

    @property
    def is_numeric(self) -> bool:
        return self.ctype == "numeric"

    def distinct_values(self) -> list:
        """Distinct non-missing cell values in deterministic sorted order."""
        seen = set(v for v in self.values if v is not None)
        return sorted(seen, key=lambda v: (isinstance(v, str), v))


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    row_count: int

    def column(self, name: str) -> Column:
        for col in self.columns:
            if col.name == name:
                return col
        raise UnknownTableOrColumnError(f"no column {name!r} in table {self.name!r}")

    def has_column(self, name: str) -> bool:
        return any(col.name == name for col in self.columns)


@dataclass(frozen=True)
class ForeignKey:
    from_table: str
    from_column: str
    to_table: str
    to_column: str


@dataclass(frozen=True)
class Schema:
    tables: tuple[Table, ...]
    fks: tuple[ForeignKey, ...]

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise UnknownTableOrColumnError(f"no table {name!r}")

    def has_table(self, name: str) -> bool:
        return any(t.name == name for t in self.tables)


@dataclass(frozen=True)
class DataDictionary:
    entries: dict[tuple[str, str], str] = field(default_factory=dict)

    def description(self, table: str, column: str) -> str | None:
        return self.entries.get((table, column))


@dataclass(frozen=True)
class JoinPlan:
    tables: tuple[str, ...]  # needed plus connectors, sorted
    predicates: tuple[ForeignKey, ...]  # equality joins along PK-FK paths


def load_csv(data: bytes, name: str) -> Table:
    """Load one CSV table (comma separated, double-quote quoting, UTF-8)."""
    text = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader]
    # A lone trailing newline yields no records; filter fully-empty records
    # produced by blank lines at the end of the file.
    while rows and rows[-1] == []:
        rows.pop()
    if not rows:
        raise EmptyInputError(f"{name}: no header record")
    header = [h.strip() for h in rows[0]]
    if any(not h for h in header):
        raise DuplicateHeaderError(f"{name}: empty column name in header")
    if len(set(header)) != len(header):
        raise DuplicateHeaderError(f"{name}: duplicate column names in header")
    width = len(header)
    cells: list[list[str]] = [[] for _ in header]
    for lineno, row in enumerate(rows[1:], start=2):
        if row == []:  # blank line mid-file: skip
            continue
        if len(row) != width:
            raise RaggedRowError(
                f"{name}: row {lineno} has {len(row)} fields, expected {width}"
            )
        for i, cell in enumerate(row):
            cells[i].append(cell.strip())

    columns = []
    for colname, raw in zip(header, cells):
        parsed = [parse_numeric_cell(c) if c else None for c in raw]
        numeric = all(p is not None for c, p in zip(raw, parsed) if c)
        if numeric:
            values = tuple(parsed)
            ctype = "numeric"
        else:
            values = tuple(c if c else None for c in raw)
            ctype = "text"
        columns.append(Column(name=colname, ctype=ctype, values=values))
    return Table(name=name, columns=tuple(columns), row_count=len(cells[0]) if cells else 0)


def build_schema(tables: list[Table], fks: list[ForeignKey]) -> Schema:
    """Validate tables + foreign keys into an acyclic schema."""
    names = [t.name for t in tables]
    if len(set(names)) != len(names):
        raise UnknownTableOrColumnError("duplicate table names")
    by_name = {t.name: t for t in tables}

    for fk in fks:
        for tname, cname in ((fk.from_table, fk.from_column), (fk.to_table, fk.to_column)):
            if tname not in by_name:
                raise UnknownTableOrColumnError(f"foreign key references unknown table {tname!r}")
            if not by_name[tname].has_column(cname):
                raise UnknownTableOrColumnError(
                    f"foreign key references unknown column {tname}.{cname}"
                )
        target = by_name[fk.to_table].column(fk.to_column)
        seen: set = set()
        for v in target.values:
            if v is None or v in seen:  # a primary key admits no missing values
                raise NonUniqueKeyError(
                    f"{fk.to_table}.{fk.to_column} is not a unique key"
                )
            seen.add(v)

    # Kahn's algorithm over the directed fk graph; leftover nodes mean a cycle.
    out_edges: dict[str, list[str]] = {n: [] for n in names}
    indegree = {n: 0 for n in names}
    for fk in fks:
        out_edges[fk.from_table].append(fk.to_table)
        indegree[fk.to_table] += 1
    queue = deque(sorted(n for n in names if indegree[n] == 0))
    visited = 0
    while queue:
        node = queue.popleft()
        visited += 1
        for succ in out_edges[node]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                queue.append(succ)
    if visited != len(names):
        raise CyclicSchemaError("foreign-key graph contains a cycle")

    return Schema(tables=tuple(tables), fks=tuple(fks))


def parse_data_dictionary(data: bytes, schema: Schema) -> DataDictionary:
    """Parse tab-separated "table.column<TAB>description" lines."""
    entries: dict[tuple[str, str], str] = {}
    for lineno, line in enumerate(data.decode("utf-8-sig").splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise MalformedLineError(f"line {lineno}: missing tab separator")
        key, description = line.split("\t", 1)
        key = key.strip()
        if "." not in key:
            raise MalformedLineError(f"line {lineno}: key must be table.column")
        tname, cname = key.split(".", 1)
        if not schema.has_table(tname) or not schema.table(tname).has_column(cname):
            raise UnknownColumnError(f"line {lineno}: unknown column {key}")
        entries[(tname, cname)] = description.strip()
    return DataDictionary(entries=entries)


def _adjacency(schema: Schema) -> dict[str, list[tuple[str, ForeignKey]]]:
    """Undirected fk adjacency; neighbors sorted for deterministic traversal."""
    adj: dict[str, list[tuple[str, ForeignKey]]] = {t.name: [] for t in schema.tables}
    for fk in schema.fks:
        adj[fk.from_table].append((fk.to_table, fk))
        adj[fk.to_table].append((fk.from_table, fk))
    for name in adj:
        adj[name].sort(key=lambda e: (e[0], e[1].from_table, e[1].from_column,
                                      e[1].to_table, e[1].to_column))
    return adj


def _shortest_path(adj, sources: set[str], goal: str):
    """BFS from a set of sources; ties broken by lexicographic node sequence."""
    # paths[v] = (table sequence, fk edge list); BFS layer order plus sorted
    # expansion makes the first completed path the lexicographic winner.
    best: dict[str, tuple[tuple[str, ...], tuple[ForeignKey, ...]]] = {}
    frontier = []
    for s in sorted(sources):
        best[s] = ((s,), ())
        frontier.append(s)
    while frontier:
        frontier.sort(key=lambda v: best[v][0])
        next_frontier = []
        for node in frontier:
            seq, edges = best[node]
            for succ, fk in adj[node]:
                cand = (seq + (succ,), edges + (fk,))
                if succ not in best:
                    best[succ] = cand
                    next_frontier.append(succ)
                elif len(best[succ][0]) == len(cand[0]) and cand[0] < best[succ][0]:
                    best[succ] = cand
        if goal in best:
            return best[goal]
        frontier = next_frontier
    return None


def join_plan(schema: Schema, needed_tables: set[str]) -> JoinPlan:
    """Connect the needed tables along PK-FK paths.

    Multiple paths resolve to the shortest; remaining ties break on the
    lexicographic order of traversed table-name sequences. Connector
    tables that turn out redundant are pruned so the result is minimal.
    """
    if not needed_tables:
        raise UnknownTableOrColumnError("join_plan requires at least one table")
    for name in needed_tables:
        if not schema.has_table(name):
            raise UnknownTableOrColumnError(f"no table {name!r}")

    adj = _adjacency(schema)
    ordered = sorted(needed_tables)
    plan_tables: set[str] = {ordered[0]}
    plan_edges: list[ForeignKey] = []
    for goal in ordered[1:]:
        if goal in plan_tables:
            continue
        found = _shortest_path(adj, plan_tables, goal)
        if found is None:
            raise DisconnectedError(f"no PK-FK path reaches table {goal!r}")
        seq, edges = found
        plan_tables.update(seq)
        for fk in edges:
            if fk not in plan_edges:
                plan_edges.append(fk)

    # Prune redundant connectors: drop any non-needed table whose removal
    # keeps the needed set connected within the plan subgraph.
    def connected(tables: set[str], edges: list[ForeignKey]) -> bool:
        if not needed_tables <= tables:
            return False
        local: dict[str, set[str]] = {t: set() for t in tables}
        for fk in edges:
            if fk.from_table in tables and fk.to_table in tables:
                local[fk.from_table].add(fk.to_table)
                local[fk.to_table].add(fk.from_table)
        start = next(iter(sorted(needed_tables)))
        seen = {start}
        stack = [start]
        while stack:
            for succ in local[stack.pop()]:
                if succ not in seen:
                    seen.add(succ)
                    stack.append(succ)
        return needed_tables <= seen

    for extra in sorted(plan_tables - needed_tables):
        trial_tables = plan_tables - {extra}
        trial_edges = [fk for fk in plan_edges
                       if fk.from_table != extra and fk.to_table != extra]
        if connected(trial_tables, trial_edges):
            plan_tables = trial_tables
            plan_edges = trial_edges

    plan_edges = [fk for fk in plan_edges
                  if fk.from_table in plan_tables and fk.to_table in plan_tables]
    return JoinPlan(tables=tuple(sorted(plan_tables)), predicates=tuple(plan_edges))


def load_schema_sidecar(data: bytes) -> tuple[list[str], list[ForeignKey]]:
    """Parse the schema sidecar JSON: table file paths plus fk pairs.

    Format: {"tables": ["a.csv", ...],
             "foreign_keys": [{"from": "a.b_id", "to": "b.id"}, ...]}
    """
    doc = json.loads(data.decode("utf-8"))
    paths = list(doc.get("tables", []))
    fks = []
    for entry in doc.get("foreign_keys", []):
        src, dst = entry["from"], entry["to"]
        ft, fc = src.split(".", 1)
        tt, tc = dst.split(".", 1)
        fks.append(ForeignKey(ft, fc, tt, tc))
    return paths, fks
