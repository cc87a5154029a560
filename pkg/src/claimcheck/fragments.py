"""Query-fragment catalog, keyword bags and BM25 retrieval.

Every fragment (aggregation function, aggregation column, equality
predicate) carries a multiset of lowercase keywords. Fragments are
indexed per category in an inverted index; claim keyword sets query the
index and receive BM25 scores weighted by keyword weight.
"""

from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field

from .dataset import DataDictionary, Schema
from .lexicon import BUILTIN_SYNONYMS, FUNCTION_KEYWORDS, STOPWORDS
from .queries import (
    AGG_FUNCTIONS,
    AggColumnFragment,
    Fragment,
    FunctionFragment,
    PredicateFragment,
    STAR,
)

logger = logging.getLogger(__name__)

CATEGORY_FUNCTION = "function"
CATEGORY_TARGET = "target"
CATEGORY_PREDICATE = "predicate"
CATEGORIES = (CATEGORY_FUNCTION, CATEGORY_TARGET, CATEGORY_PREDICATE)

# Columns with more distinct literals than this produce no predicate
# fragments (guards pathological id-like columns).
MAX_PREDICATE_LITERALS = 20_000

BM25_K1 = 1.2
BM25_B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_CASE_SPLIT_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


class SynonymProvider:
    """Synonym lookup backed by the built-in lexicon plus optional TSV."""

    def __init__(self, table: dict[str, list[str]] | None = None,
                 include_builtin: bool = True):
        merged: dict[str, list[str]] = {}
        if include_builtin:
            for term, syns in BUILTIN_SYNONYMS.items():
                merged[term] = list(syns)
        for term, syns in (table or {}).items():
            merged.setdefault(term, [])
            for s in syns:
                if s not in merged[term]:
                    merged[term].append(s)
        self._table = merged

    def synonyms(self, term: str) -> list[str]:
        return self._table.get(term.lower(), [])


def tokenize_text(text: str) -> list[str]:
    """Lowercase alphanumeric tokens with stopwords removed."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in STOPWORDS]


def _segment(token: str, wordlist: set[str]) -> list[str]:
    """Greedy longest-dictionary-substring segmentation of one token."""
    if not token:
        return []
    found = None
    for length in range(len(token), 0, -1):
        for start in range(0, len(token) - length + 1):
            if token[start:start + length] in wordlist:
                found = (start, length)
                break
        if found:
            break
    if found is None:
        return [token] if len(token) >= 3 else []
    start, length = found
    return (
        _segment(token[:start], wordlist)
        + [token[start:start + length]]
        + _segment(token[start + length:], wordlist)
    )


def decompose_name(name: str, wordlist: set[str]) -> list[str]:
    """Split an identifier into dictionary words.

    The name is first split on non-alphanumerics and lower-to-upper case
    transitions; each remaining token is then segmented greedily by
    repeatedly extracting the longest substring found in the wordlist.
    Unmatched residue of three or more characters is kept verbatim,
    shorter residue is dropped.
    """
    spaced = _CASE_SPLIT_RE.sub(" ", name)
    tokens = re.split(r"[^0-9A-Za-z]+", spaced)
    terms = []
    for token in tokens:
        if not token:
            continue
        terms.extend(_segment(token.lower(), wordlist))
    return terms


@dataclass
class FragmentCatalog:
    """All fragments for one schema, grouped by category, in identity order."""
    functions: list[FunctionFragment]
    targets: list[AggColumnFragment]
    predicates: list[PredicateFragment]
    bags: dict[Fragment, Counter]
    numeric_targets: frozenset  # (table, column) pairs valid for Sum/Avg/Min/Max

    def fragments(self, category: str) -> list:
        return {
            CATEGORY_FUNCTION: self.functions,
            CATEGORY_TARGET: self.targets,
            CATEGORY_PREDICATE: self.predicates,
        }[category]

    def counts(self) -> dict[str, int]:
        return {c: len(self.fragments(c)) for c in CATEGORIES}


def derive_fragment_keywords(fragment: Fragment, schema: Schema,
                             dictionary: DataDictionary | None,
                             synonyms: SynonymProvider,
                             wordlist: set[str]) -> Counter:
    """Build the keyword multiset for one fragment."""
    bag: Counter = Counter()

    def add(terms):
        for t in terms:
            t = t.lower()
            if t and t not in STOPWORDS:
                bag[t] += 1

    def add_name_terms(table: str | None, column: str | None):
        name_terms: list[str] = []
        if column and column != "*":
            name_terms.extend(decompose_name(column, wordlist))
        if table:
            name_terms.extend(decompose_name(table, wordlist))
        add(name_terms)
        for term in name_terms:
            add(synonyms.synonyms(term))
        if dictionary and table and column and column != "*":
            desc = dictionary.description(table, column)
            if desc:
                add(tokenize_text(desc))

    if isinstance(fragment, FunctionFragment):
        add(FUNCTION_KEYWORDS[fragment.func.value])
    elif isinstance(fragment, AggColumnFragment):
        if fragment.is_star:
            # star has no column name; table-name terms only
            for table in schema.tables:
                add(decompose_name(table.name, wordlist))
        else:
            add_name_terms(fragment.table, fragment.column)
    elif isinstance(fragment, PredicateFragment):
        literal = fragment.literal
        if isinstance(literal, str):
            literal_terms = tokenize_text(literal)
        else:
            from .queries import format_number
            literal_terms = [format_number(literal)]
        add(literal_terms)
        for term in literal_terms:
            add(synonyms.synonyms(term))
        add_name_terms(fragment.table, fragment.column)
    return bag


def build_catalog(schema: Schema, dictionary: DataDictionary | None = None,
                  synonyms: SynonymProvider | None = None,
                  wordlist: set[str] | None = None) -> FragmentCatalog:
    """Enumerate every fragment the schema supports and attach keywords."""
    synonyms = synonyms or SynonymProvider()
    wordlist = wordlist or set()

    functions = [FunctionFragment(f) for f in AGG_FUNCTIONS]

    targets: list[AggColumnFragment] = [STAR]
    numeric = []
    for table in schema.tables:
        for col in table.columns:
            if col.is_numeric:
                targets.append(AggColumnFragment(table=table.name, column=col.name))
                numeric.append((table.name, col.name))

    predicates: list[PredicateFragment] = []
    for table in schema.tables:
        for col in table.columns:
            distinct = col.distinct_values()
            if len(distinct) > MAX_PREDICATE_LITERALS:
                logger.warning(
                    "column %s.%s has %d distinct literals (cap %d); "
                    "skipping predicate fragments",
                    table.name, col.name, len(distinct), MAX_PREDICATE_LITERALS,
                )
                continue
            for value in distinct:
                predicates.append(
                    PredicateFragment(table=table.name, column=col.name, literal=value)
                )

    bags = {}
    for frag in [*functions, *targets, *predicates]:
        bags[frag] = derive_fragment_keywords(frag, schema, dictionary, synonyms, wordlist)
    return FragmentCatalog(
        functions=functions,
        targets=targets,
        predicates=predicates,
        bags=bags,
        numeric_targets=frozenset(numeric),
    )


@dataclass
class _CategoryIndex:
    fragments: list
    postings: dict[str, list[tuple[int, int]]]  # term -> [(fragment idx, tf)]
    doc_count: int
    avg_bag_size: float
    bag_sizes: list[int]


@dataclass
class FragmentIndex:
    catalog: FragmentCatalog
    categories: dict[str, _CategoryIndex] = field(default_factory=dict)


def build_index(catalog: FragmentCatalog) -> FragmentIndex:
    """Per-category inverted index with BM25 corpus statistics."""
    index = FragmentIndex(catalog=catalog)
    for category in CATEGORIES:
        frags = catalog.fragments(category)
        postings: dict[str, list[tuple[int, int]]] = {}
        sizes = []
        for i, frag in enumerate(frags):
            bag = catalog.bags[frag]
            sizes.append(sum(bag.values()))
            for term, tf in bag.items():
                postings.setdefault(term, []).append((i, tf))
        doc_count = len(frags)
        avg = (sum(sizes) / doc_count) if doc_count else 0.0
        index.categories[category] = _CategoryIndex(
            fragments=frags,
            postings=postings,
            doc_count=doc_count,
            avg_bag_size=avg,
            bag_sizes=sizes,
        )
    return index


def bm25_term_score(tf: int, doc_freq: int, doc_count: int,
                    bag_size: int, avg_bag_size: float) -> float:
    """Lucene-style BM25 with non-negative idf."""
    idf = math.log(1.0 + (doc_count - doc_freq + 0.5) / (doc_freq + 0.5))
    if avg_bag_size <= 0:
        norm = 1.0
    else:
        norm = 1.0 - BM25_B + BM25_B * bag_size / avg_bag_size
    return idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)


@dataclass
class RelevanceRow:
    """Top-k fragment scores per category for one claim."""
    scores: dict[str, dict[Fragment, float]]

    def category(self, category: str) -> dict[Fragment, float]:
        return self.scores.get(category, {})

    def score(self, category: str, fragment: Fragment) -> float | None:
        return self.scores.get(category, {}).get(fragment)


def retrieve(index: FragmentIndex, query: dict[str, float], k: int) -> RelevanceRow:
    """Score fragments against a weighted keyword query, top-k per category.

    score(fragment) = sum over query terms of weight * BM25(term, bag).
    Zero-scored fragments are dropped; ties break on catalog order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    result: dict[str, dict[Fragment, float]] = {}
    for category, cidx in index.categories.items():
        accum: dict[int, float] = {}
        for term, weight in query.items():
            plist = cidx.postings.get(term)
            if not plist or weight <= 0:
                continue
            df = len(plist)
            for frag_i, tf in plist:
                s = weight * bm25_term_score(
                    tf, df, cidx.doc_count, cidx.bag_sizes[frag_i], cidx.avg_bag_size
                )
                accum[frag_i] = accum.get(frag_i, 0.0) + s
        ranked = sorted(
            ((i, s) for i, s in accum.items() if s > 0.0),
            key=lambda item: (-item[1], item[0]),
        )[:k]
        result[category] = {cidx.fragments[i]: s for i, s in ranked}
    return RelevanceRow(scores=result)
