"""Built-in word lists: stopwords, number words, months, synonyms.

All retrieval-side and claim-side tokenization shares STOPWORDS so that
keyword bags and keyword queries are filtered symmetrically.
"""

from __future__ import annotations

# Fixed English stopword list (~150 words). Applied to fragment keyword
# bags and to claim keyword sets alike.
STOPWORDS = frozenset("""
a about above after again against all am an and any are aren't as at be
because been before being below between both but by can cannot could
couldn't did didn't do does doesn't doing don't down during each few for
from further had hadn't has hasn't have haven't having he he'd he'll he's
her here here's hers herself him himself his how how's i i'd i'll i'm i've
if in into is isn't it it's its itself let's me more most mustn't my myself
no nor not of off on once only or other ought our ours ourselves out over
own same shan't she she'd she'll she's should shouldn't so some such than
that that's the their theirs them themselves then there there's these they
they'd they'll they're they've this those through to too under until up
very was wasn't we we'd we'll we're we've were weren't what what's when
when's where where's which while who who's whom why why's with won't would
wouldn't you you'd you'll you're you've your yours yourself yourselves
""".split())

# Spelled-out cardinal vocabulary, compounds handled by the tokenizer.
UNITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
    "eleven": 11, "twelve": 12, "thirteen": 13, "fourteen": 14,
    "fifteen": 15, "sixteen": 16, "seventeen": 17, "eighteen": 18,
    "nineteen": 19, "twenty": 20,
}

TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}

MULTIPLIERS = {
    "hundred": 100,
    "thousand": 1_000,
    "million": 1_000_000,
    "billion": 1_000_000_000,
}

NUMBER_WORDS = frozenset(UNITS) | frozenset(TENS) | frozenset(MULTIPLIERS)

MONTHS = frozenset("""
january february march april may june july august september october
november december jan feb mar apr jun jul aug sep sept oct nov dec
""".split())

# Abbreviations that end with a period but do not terminate a sentence.
ABBREVIATIONS = frozenset("""
mr mrs ms dr prof sr jr st vs etc e.g i.e approx dept est fig no
u.s u.k jan feb mar apr jun jul aug sep sept oct nov dec
""".split())

# Fixed keyword set per aggregation function (names must line up with
# queries.AggFunction values).
FUNCTION_KEYWORDS = {
    "count": ["count", "number", "many", "total", "times"],
    "count_distinct": ["distinct", "unique", "different"],
    "sum": ["sum", "total", "combined", "overall"],
    "avg": ["average", "mean", "typical", "per"],
    "min": ["minimum", "least", "lowest", "smallest", "fewest"],
    "max": ["maximum", "most", "highest", "largest", "biggest"],
    "percentage": ["percent", "percentage", "share", "proportion", "ratio"],
    "conditional_probability": ["of", "among", "given", "those", "who"],
}

# Small built-in synonym lexicon; a TSV file (term<TAB>synonym) can extend
# or replace it. Degrades gracefully to nothing when absent.
BUILTIN_SYNONYMS = {
    "ban": ["suspension"],
    "bans": ["suspensions"],
    "suspension": ["ban"],
    "suspensions": ["bans"],
    "salary": ["pay", "wage", "earnings"],
    "pay": ["salary", "wage"],
    "wage": ["salary", "pay"],
    "earnings": ["salary", "income"],
    "income": ["earnings", "salary"],
    "revenue": ["sales", "income"],
    "sales": ["revenue"],
    "price": ["cost"],
    "cost": ["price"],
    "amount": ["quantity", "total"],
    "quantity": ["amount", "count"],
    "kids": ["children"],
    "children": ["kids"],
    "car": ["vehicle", "automobile"],
    "vehicle": ["car"],
    "job": ["occupation", "employment"],
    "occupation": ["job"],
    "employer": ["company"],
    "company": ["employer", "firm"],
    "state": ["region"],
    "country": ["nation"],
    "nation": ["country"],
    "city": ["town"],
    "team": ["club"],
    "player": ["athlete"],
    "game": ["match"],
    "games": ["matches"],
    "respondent": ["participant"],
    "respondents": ["participants"],
    "coder": ["developer", "programmer"],
    "coders": ["developers", "programmers"],
    "developer": ["coder", "programmer"],
    "developers": ["coders", "programmers"],
    "education": ["schooling"],
    "age": ["years"],
    "year": ["annual"],
    "category": ["type", "kind", "class"],
    "type": ["category", "kind"],
    "reason": ["cause"],
    "candidate": ["nominee"],
    "candidates": ["nominees"],
    "donation": ["contribution"],
    "donations": ["contributions"],
}


def load_synonyms_tsv(text: str) -> dict[str, list[str]]:
    """Parse a term<TAB>synonym lexicon; one pair per non-empty line."""
    table: dict[str, list[str]] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "\t" not in line:
            continue
        term, synonym = line.split("\t", 1)
        term = term.strip().lower()
        synonym = synonym.strip().lower()
        if term and synonym:
            table.setdefault(term, []).append(synonym)
    return table


def load_wordlist(text: str) -> set[str]:
    """Parse a one-word-per-line decomposition wordlist."""
    return {w.strip().lower() for w in text.splitlines() if w.strip()}
