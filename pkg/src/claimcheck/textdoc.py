"""Document ingestion, claim detection and keyword-context extraction.

Documents form a tree: sections (from h1-h6 or markdown-style # lines)
contain paragraphs, paragraphs contain sentences, sentences carry tokens
with character spans. Claim sites are numeric literals or spelled-out
cardinals that plausibly state an aggregate query result.
"""

from __future__ import annotations

import json
import logging
import re
from collections import deque
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .errors import MalformedMarkupError
from .lexicon import (
    ABBREVIATIONS,
    MONTHS,
    MULTIPLIERS,
    NUMBER_WORDS,
    STOPWORDS,
    TENS,
    UNITS,
)

logger = logging.getLogger(__name__)

TOKEN_RE = re.compile(
    r"\d+(?:st|nd|rd|th)\b"
    r"|\d+(?:,\d{3})*(?:\.\d+)?%?(?![0-9A-Za-z])"
    r"|[A-Za-z][0-9A-Za-z]*(?:[-'][0-9A-Za-z]+)*"
    r"|\d[0-9A-Za-z]*"  # digit-led identifiers like 3M stay one word token
    r"|%"
)

NUMBER_TOKEN_RE = re.compile(r"^\d+(?:,\d{3})*(?:\.\d+)?%?$")
ORDINAL_RE = re.compile(r"^\d+(?:st|nd|rd|th)$")
YEAR_PREPOSITIONS = frozenset({"in", "since", "until", "by", "before", "after"})
PERCENT_WORDS = frozenset({"percent", "percentage", "%"})


@dataclass
class Token:
    text: str
    start: int  # char offset within the sentence text
    end: int


@dataclass
class Sentence:
    text: str
    tokens: list[Token]
    index: int = -1  # global sentence index in document order


@dataclass
class Paragraph:
    sentences: list[Sentence] = field(default_factory=list)


@dataclass
class Section:
    level: int
    headline: str = ""
    paragraphs: list[Paragraph] = field(default_factory=list)
    children: list["Section"] = field(default_factory=list)
    parent: "Section | None" = None

    def headline_tokens(self) -> list[str]:
        return [t for t in re.findall(r"[a-z0-9]+", self.headline.lower())
                if t not in STOPWORDS]


@dataclass
class Document:
    root: Section
    sentences: list[Sentence] = field(default_factory=list)
    paragraph_of: dict[int, Paragraph] = field(default_factory=dict)
    section_of: dict[int, Section] = field(default_factory=dict)

    def finalize(self) -> "Document":
        """Number sentences and record paragraph/section back-pointers."""
        self.sentences = []
        self.paragraph_of = {}
        self.section_of = {}

        def visit(section: Section):
            for para in section.paragraphs:
                for sent in para.sentences:
                    sent.index = len(self.sentences)
                    self.sentences.append(sent)
                    self.paragraph_of[sent.index] = para
                    self.section_of[sent.index] = section
            for child in section.children:
                visit(child)

        visit(self.root)
        return self


@dataclass(frozen=True)
class ClaimSite:
    sentence_index: int
    token_start: int  # token index range within the sentence
    token_end: int  # exclusive
    claimed_value: float
    sig_digits: int
    exact_word: bool
    is_percent: bool

    def span(self, doc: Document) -> tuple[int, int]:
        sent = doc.sentences[self.sentence_index]
        return (sent.tokens[self.token_start].start,
                sent.tokens[self.token_end - 1].end)

    def surface(self, doc: Document) -> str:
        sent = doc.sentences[self.sentence_index]
        start, end = self.span(doc)
        return sent.text[start:end]


@dataclass
class DistanceProvider:
    """Token distance within a sentence: dependency hops or surface offset."""
    mode: str = "surface"  # "surface" | "parsed"
    edges: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    _warned: set = field(default_factory=set)

    def distance(self, sentence: Sentence, a: int, b: int) -> int:
        if a == b:
            return 1
        if self.mode == "parsed":
            edge_list = self.edges.get(sentence.index)
            if edge_list is None:
                if sentence.index not in self._warned:
                    logger.warning(
                        "no parse for sentence %d; falling back to surface distance",
                        sentence.index,
                    )
                    self._warned.add(sentence.index)
            else:
                hops = _tree_distance(edge_list, a, b)
                if hops is not None:
                    return max(1, hops)
        return max(1, abs(a - b))


def _tree_distance(edges: list[tuple[int, int]], a: int, b: int) -> int | None:
    adj: dict[int, list[int]] = {}
    for h, d in edges:
        adj.setdefault(h, []).append(d)
        adj.setdefault(d, []).append(h)
    if a not in adj or b not in adj:
        return None
    seen = {a}
    queue = deque([(a, 0)])
    while queue:
        node, dist = queue.popleft()
        if node == b:
            return dist
        for nxt in adj.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, dist + 1))
    return None


def load_parse_sidecar(data: bytes) -> DistanceProvider:
    """JSON array per sentence of [head_index, dependent_index] pairs."""
    doc = json.loads(data.decode("utf-8"))
    edges = {}
    for i, pairs in enumerate(doc):
        edges[i] = [(int(h), int(d)) for h, d in pairs]
    return DistanceProvider(mode="parsed", edges=edges)


# --- sentence splitting ---

def _is_abbreviation(text: str, pos: int) -> bool:
    """True when the period at pos ends a known abbreviation."""
    start = pos
    while start > 0 and (text[start - 1].isalpha() or text[start - 1] == "."):
        start -= 1
    word = text[start:pos].lower().rstrip(".")
    return word in ABBREVIATIONS


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation with abbreviation and decimal guards."""
    sentences = []
    begin = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in ".!?":
            nxt = text[i + 1] if i + 1 < n else ""
            prev = text[i - 1] if i > 0 else ""
            if ch == "." and prev.isdigit() and nxt.isdigit():
                i += 1
                continue
            if ch == "." and _is_abbreviation(text, i):
                i += 1
                continue
            if nxt and not nxt.isspace():
                i += 1
                continue
            piece = text[begin:i + 1].strip()
            if piece:
                sentences.append(piece)
            begin = i + 1
        i += 1
    tail = text[begin:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _make_sentence(text: str) -> Sentence:
    tokens = [Token(m.group(0), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]
    return Sentence(text=text, tokens=tokens)


def _make_paragraph(text: str) -> Paragraph:
    text = re.sub(r"\s+", " ", text).strip()
    return Paragraph(sentences=[_make_sentence(s) for s in split_sentences(text)])


# --- HTML ingestion ---

_HEADING_TAGS = {f"h{i}": i for i in range(1, 7)}
_BLOCK_TAGS = {"p", "div", "li"}


class _DocHTMLParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Section(level=0)
        self.stack = [self.root]
        self.heading_level: int | None = None
        self.heading_text: list[str] = []
        self.block_text: list[str] = []
        self.paragraphs_done = False

    def _flush_block(self):
        text = "".join(self.block_text)
        self.block_text = []
        if text.strip():
            self.stack[-1].paragraphs.append(_make_paragraph(text))

    def handle_starttag(self, tag, attrs):
        if tag in _HEADING_TAGS:
            if self.heading_level is not None:
                raise MalformedMarkupError(f"nested heading <{tag}>")
            self._flush_block()
            self.heading_level = _HEADING_TAGS[tag]
            self.heading_text = []
        elif tag in _BLOCK_TAGS:
            self._flush_block()

    def handle_endtag(self, tag):
        if tag in _HEADING_TAGS:
            if self.heading_level is None:
                return  # stray close tag: recovered
            level = self.heading_level
            while self.stack[-1].level >= level:
                self.stack.pop()
            section = Section(
                level=level,
                headline=" ".join("".join(self.heading_text).split()),
                parent=self.stack[-1],
            )
            self.stack[-1].children.append(section)
            self.stack.append(section)
            self.heading_level = None
            self.heading_text = []
        elif tag in _BLOCK_TAGS:
            self._flush_block()

    def handle_data(self, data):
        if self.heading_level is not None:
            self.heading_text.append(data)
        else:
            self.block_text.append(data)

    def finish(self) -> Section:
        if self.heading_level is not None:
            raise MalformedMarkupError("unclosed heading tag at end of input")
        self._flush_block()
        return self.root


def _parse_html(text: str) -> Section:
    parser = _DocHTMLParser()
    parser.feed(text)
    parser.close()
    return parser.finish()


def _parse_canonical(text: str) -> Section:
    """Markdown-style: '#'-prefixed lines open sections, blank lines split
    paragraphs; plain text collapses to a single implicit section."""
    root = Section(level=0)
    stack = [root]
    buffer: list[str] = []

    def flush():
        joined = "\n".join(buffer).strip()
        buffer.clear()
        if joined:
            stack[-1].paragraphs.append(_make_paragraph(joined))

    for line in text.splitlines():
        heading = re.match(r"^(#{1,6})\s+(.*)$", line)
        if heading:
            flush()
            level = len(heading.group(1))
            while stack[-1].level >= level:
                stack.pop()
            section = Section(level=level, headline=heading.group(2).strip(),
                              parent=stack[-1])
            stack[-1].children.append(section)
            stack.append(section)
        elif not line.strip():
            flush()
        else:
            buffer.append(line)
    flush()
    return root


def ingest_document(data: bytes | str) -> Document:
    """Parse HTML (h1-h6/p/div/li subset) or canonical structured text."""
    text = data.decode("utf-8-sig") if isinstance(data, bytes) else data
    if re.search(r"<\s*(h[1-6]|p|div|li|html|body)\b", text, re.IGNORECASE):
        root = _parse_html(text)
    else:
        root = _parse_canonical(text)
    return Document(root=root).finalize()


# --- claim detection ---

def _word_number_value(tokens: list[str]) -> float | None:
    """Parse a run of cardinal words ('twenty-one', 'two thousand')."""
    words: list[str] = []
    for tok in tokens:
        words.extend(tok.split("-"))
    total = 0.0
    current = 0.0
    seen_any = False
    for w in words:
        w = w.lower()
        if w in UNITS:
            current += UNITS[w]
            seen_any = True
        elif w in TENS:
            current += TENS[w]
            seen_any = True
        elif w == "hundred":
            current = (current or 1) * 100
            seen_any = True
        elif w in MULTIPLIERS:
            total += (current or 1) * MULTIPLIERS[w]
            current = 0
            seen_any = True
        else:
            return None
    return total + current if seen_any else None


def _count_sig_digits(number_text: str) -> int:
    digits = "".join(c for c in number_text if c.isdigit())
    first = next((i for i, c in enumerate(digits) if c != "0"), None)
    if first is None:
        return 1
    if "." in number_text:
        return len(digits) - first
    last = max(i for i, c in enumerate(digits) if c != "0")
    return last - first + 1


def parse_number(tokens: list[str]) -> tuple[float, int, bool, bool]:
    """Parse a claim token span into (value, sig_digits, exact_word, is_percent).

    The span is either one numeric token (optionally followed by a
    multiplier word or percent marker) or a run of cardinal words.
    """
    first = tokens[0]
    is_percent = any(t.lower() in PERCENT_WORDS or t.endswith("%") for t in tokens)
    if NUMBER_TOKEN_RE.match(first):
        clean = first.rstrip("%")
        value = float(clean.replace(",", ""))
        sig = _count_sig_digits(clean)
        multiplier = 1.0
        for tok in tokens[1:]:
            if tok.lower() in MULTIPLIERS:
                multiplier *= MULTIPLIERS[tok.lower()]
        return (value * multiplier, sig, False, is_percent)
    value = _word_number_value([t for t in tokens if t.lower() not in PERCENT_WORDS])
    if value is None:
        raise ValueError(f"not a number span: {tokens!r}")
    sig = len(str(int(value))) if value == int(value) else _count_sig_digits(str(value))
    return (value, sig, True, is_percent)


def _is_month(token: str | None) -> bool:
    return token is not None and token.lower().rstrip(".") in MONTHS


def detect_claims(doc: Document) -> list[ClaimSite]:
    """Find candidate claim sites, skipping years, ordinals and dates."""
    claims: list[ClaimSite] = []
    for sent in doc.sentences:
        texts = [t.text for t in sent.tokens]
        i = 0
        n = len(texts)
        while i < n:
            tok = texts[i]
            low = tok.lower()
            if ORDINAL_RE.match(tok):
                i += 1
                continue
            if NUMBER_TOKEN_RE.match(tok):
                prev = texts[i - 1].lower() if i > 0 else None
                nxt = texts[i + 1] if i + 1 < n else None
                # year pattern: 1000-2999 straight after a time preposition
                bare = tok.rstrip("%")
                if ("." not in bare and "," not in bare and "%" not in tok
                        and prev in YEAR_PREPOSITIONS
                        and bare.isdigit() and 1000 <= int(bare) <= 2999):
                    i += 1
                    continue
                # date pattern: number adjacent to a month name, or the year
                # right after a month-day pair
                prev2 = texts[i - 2] if i >= 2 else None
                if (_is_month(texts[i - 1] if i > 0 else None)
                        or _is_month(nxt)
                        or (_is_month(prev2) and prev is not None
                            and prev.isdigit())):
                    i += 1
                    continue
                end = i + 1
                if end < n and texts[end].lower() in MULTIPLIERS and "%" not in tok:
                    end += 1
                value, sig, exact, percent = parse_number(texts[i:end])
                if not percent and end < n and texts[end].lower() in PERCENT_WORDS:
                    percent = True
                claims.append(ClaimSite(
                    sentence_index=sent.index, token_start=i, token_end=end,
                    claimed_value=value, sig_digits=sig,
                    exact_word=exact, is_percent=percent,
                ))
                i = end
                continue
            if low in NUMBER_WORDS or (
                "-" in low and all(p in NUMBER_WORDS for p in low.split("-"))
            ):
                end = i + 1
                while end < n and texts[end].lower() in NUMBER_WORDS:
                    end += 1
                value, sig, exact, percent = parse_number(texts[i:end])
                if end < n and texts[end].lower() in PERCENT_WORDS:
                    percent = True
                claims.append(ClaimSite(
                    sentence_index=sent.index, token_start=i, token_end=end,
                    claimed_value=value, sig_digits=sig,
                    exact_word=exact, is_percent=percent,
                ))
                i = end
                continue
            i += 1
    return claims


# --- keyword context (claim keywords) ---

def _keyword_pieces(token_text: str) -> list[str]:
    return [p for p in re.findall(r"[a-z0-9]+", token_text.lower())
            if p not in STOPWORDS]


def claim_keywords(claim: ClaimSite, doc: Document, dist: DistanceProvider,
                   context_anchor: str = "min") -> dict[str, float]:
    """Weighted keyword context for one claim.

    Same-sentence tokens get weight 1/distance; the previous sentence and
    the paragraph's first sentence contribute at 0.4x the anchor weight,
    headlines up the section chain at 0.7x. Recurring terms keep their
    maximum weight; the claim's own number tokens are excluded.
    """
    sent = doc.sentences[claim.sentence_index]
    claim_positions = set(range(claim.token_start, claim.token_end))
    weights: dict[str, float] = {}

    def add(term: str, weight: float):
        if term and weight > 0:
            weights[term] = max(weights.get(term, 0.0), weight)

    in_sentence: list[float] = []
    for i, token in enumerate(sent.tokens):
        if i in claim_positions:
            continue
        pieces = _keyword_pieces(token.text)
        if not pieces:
            continue
        d = dist.distance(sent, i, claim.token_start)
        w = 1.0 / d
        in_sentence.append(w)
        for piece in pieces:
            add(piece, w)

    if in_sentence:
        anchor = min(in_sentence) if context_anchor == "min" else max(in_sentence)
    else:
        anchor = 1.0

    paragraph = doc.paragraph_of[claim.sentence_index]
    local_index = paragraph.sentences.index(sent)
    context_sentences = []
    if local_index > 0:
        context_sentences.append(paragraph.sentences[local_index - 1])
    context_sentences.append(paragraph.sentences[0])
    for ctx in context_sentences:
        for i, token in enumerate(ctx.tokens):
            if ctx.index == sent.index and i in claim_positions:
                continue
            for piece in _keyword_pieces(token.text):
                add(piece, 0.4 * anchor)

    section = doc.section_of[claim.sentence_index]
    while section is not None:
        for term in section.headline_tokens():
            add(term, 0.7 * anchor)
        section = section.parent

    return weights
