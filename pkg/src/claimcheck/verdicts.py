"""Per-claim verdicts, report assembly, markup and evaluation metrics."""

from __future__ import annotations

import html
import json
from dataclasses import dataclass, field

from .cube import MATCH, NO_VALUE, NOVALUE
from .inference import ClaimDistribution
from .queries import QueryCandidate, canonical_equal
from .textdoc import ClaimSite, Document, Section

VERIFIED = "verified"
FLAGGED = "flagged"
NO_CANDIDATE = "nocandidate"


@dataclass
class TopCandidate:
    sql: str
    nl: str
    probability: float
    value: float | None  # None encodes a missing evaluation value
    outcome: str
    candidate: QueryCandidate | None = None

    def to_dict(self) -> dict:
        return {
            "sql": self.sql,
            "nl": self.nl,
            "probability": self.probability,
            "value": self.value,
            "outcome": self.outcome,
        }


@dataclass
class Verdict:
    claim_id: int
    status: str
    claimed_value: float
    surface: str
    sentence_index: int
    span: tuple[int, int]
    correctness_probability: float
    best_value: float | None
    top_k: list[TopCandidate] = field(default_factory=list)
    pinned: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.claim_id,
            "status": self.status,
            "value": self.claimed_value,
            "span": {
                "sentence": self.sentence_index,
                "start": self.span[0],
                "end": self.span[1],
                "text": self.surface,
            },
            "correctness_probability": self.correctness_probability,
            "best_value": self.best_value,
            "pinned": self.pinned,
            "top_k": [t.to_dict() for t in self.top_k],
        }


@dataclass
class Report:
    dataset_id: str
    document_id: str
    verdicts: list[Verdict]
    priors_trace: list[dict]
    stats: dict

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "document_id": self.document_id,
            "claims": [v.to_dict() for v in self.verdicts],
            "priors_trace": self.priors_trace,
            "stats": self.stats,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Report":
        verdicts = []
        for c in doc["claims"]:
            verdicts.append(Verdict(
                claim_id=c["id"],
                status=c["status"],
                claimed_value=c["value"],
                surface=c["span"]["text"],
                sentence_index=c["span"]["sentence"],
                span=(c["span"]["start"], c["span"]["end"]),
                correctness_probability=c["correctness_probability"],
                best_value=c["best_value"],
                pinned=c.get("pinned", False),
                top_k=[TopCandidate(
                    sql=t["sql"], nl=t["nl"], probability=t["probability"],
                    value=t["value"], outcome=t["outcome"],
                ) for t in c["top_k"]],
            ))
        return cls(
            dataset_id=doc["dataset_id"],
            document_id=doc["document_id"],
            verdicts=verdicts,
            priors_trace=doc["priors_trace"],
            stats=doc["stats"],
        )

    @classmethod
    def from_json(cls, text: str) -> "Report":
        return cls.from_dict(json.loads(text))


def assemble_verdicts(claims: dict[int, ClaimSite], doc: Document,
                      distributions: dict[int, ClaimDistribution],
                      outcomes: dict[int, dict[QueryCandidate, str]],
                      values: dict[int, dict[QueryCandidate, object]],
                      render_sql, render_nl,
                      top_k: int = 20,
                      decision_rule: str = "top1") -> list[Verdict]:
    """Turn distributions and outcomes into one verdict per claim.

    Default rule: verified iff the most likely candidate's evaluation
    matched. The 'any' rule instead verifies when any scoped candidate
    matched.
    """
    verdicts = []
    for claim_id in sorted(claims):
        claim = claims[claim_id]
        dist = distributions.get(claim_id)
        claim_outcomes = outcomes.get(claim_id, {})
        claim_values = values.get(claim_id, {})
        span = claim.span(doc)
        surface = claim.surface(doc)
        if dist is None or not dist.entries:
            verdicts.append(Verdict(
                claim_id=claim_id, status=NO_CANDIDATE,
                claimed_value=claim.claimed_value, surface=surface,
                sentence_index=claim.sentence_index, span=span,
                correctness_probability=0.0, best_value=None,
            ))
            continue

        top = []
        for cand, prob in dist.entries[:top_k]:
            value = claim_values.get(cand, NO_VALUE)
            outcome = claim_outcomes.get(cand, NOVALUE)
            top.append(TopCandidate(
                sql=render_sql(cand), nl=render_nl(cand), probability=prob,
                value=None if value is NO_VALUE else value,
                outcome=outcome, candidate=cand,
            ))
        correctness = sum(
            p for cand, p in dist.entries if claim_outcomes.get(cand) == MATCH
        )
        if decision_rule == "any":
            matched = any(o == MATCH for o in claim_outcomes.values())
        else:
            matched = claim_outcomes.get(dist.ml_query) == MATCH
        verdicts.append(Verdict(
            claim_id=claim_id,
            status=VERIFIED if matched else FLAGGED,
            claimed_value=claim.claimed_value,
            surface=surface,
            sentence_index=claim.sentence_index,
            span=span,
            correctness_probability=correctness,
            best_value=top[0].value if top else None,
            top_k=top,
            pinned=dist.pinned,
        ))
    return verdicts


@dataclass
class GroundTruthEntry:
    claim_id: int
    query: QueryCandidate | None
    expected: str  # "correct" | "erroneous"


def load_ground_truth(text: str, schema, parse_sql) -> list[GroundTruthEntry]:
    """Ground-truth file: JSON list of {claim_id, sql, expected}."""
    entries = []
    for item in json.loads(text):
        query = parse_sql(item["sql"], schema) if item.get("sql") else None
        entries.append(GroundTruthEntry(
            claim_id=int(item["claim_id"]),
            query=query,
            expected=item.get("expected", "correct"),
        ))
    return entries


def topk_coverage(verdicts: list[Verdict], truth: list[GroundTruthEntry],
                  k: int) -> tuple[float, list[int]]:
    """Fraction of truth-covered claims whose top-k contains the truth
    query; returns (ratio, unmatched truth claim ids)."""
    by_id = {v.claim_id: v for v in verdicts}
    unmatched = [t.claim_id for t in truth if t.claim_id not in by_id]
    scored = [t for t in truth if t.claim_id in by_id and t.query is not None]
    if not scored:
        return 0.0, unmatched
    hits = 0
    for t in scored:
        verdict = by_id[t.claim_id]
        for entry in verdict.top_k[:k]:
            if entry.candidate is not None and canonical_equal(entry.candidate, t.query):
                hits += 1
                break
    return hits / len(scored), unmatched


@dataclass
class Metrics:
    coverage: dict[int, float]
    precision: float
    recall: float
    f1: float
    unmatched_truth: list[int]

    def to_dict(self) -> dict:
        return {
            "topk_coverage": {str(k): v for k, v in sorted(self.coverage.items())},
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "unmatched_truth": self.unmatched_truth,
        }


def precision_recall_f1(verdicts: list[Verdict], truth: list[GroundTruthEntry],
                        ks: list[int] | None = None,
                        flag_nocandidate: bool = False,
                        include_nocandidate: bool = False) -> Metrics:
    """Precision/recall over erroneous-claim detection plus top-k coverage.

    A claim counts as flagged when its verdict is flagged (optionally also
    when no candidate was found). Claims without candidates are excluded
    from scoring unless included explicitly.
    """
    ks = ks or [1, 5, 10]
    by_id = {v.claim_id: v for v in verdicts}
    unmatched = [t.claim_id for t in truth if t.claim_id not in by_id]
    scored = [t for t in truth if t.claim_id in by_id]
    if not include_nocandidate:
        scored = [t for t in scored if by_id[t.claim_id].status != NO_CANDIDATE]

    flag_statuses = {FLAGGED, NO_CANDIDATE} if flag_nocandidate else {FLAGGED}
    flagged = {t.claim_id for t in scored if by_id[t.claim_id].status in flag_statuses}
    erroneous = {t.claim_id for t in scored if t.expected == "erroneous"}

    true_flags = len(flagged & erroneous)
    precision = true_flags / len(flagged) if flagged else 1.0
    recall = true_flags / len(erroneous) if erroneous else 1.0
    f1 = (2 * precision * recall / (precision + recall)) if (precision + recall) else 0.0

    coverage = {}
    for k in ks:
        coverage[k], _ = topk_coverage(verdicts, truth, k)
    return Metrics(coverage=coverage, precision=precision, recall=recall,
                   f1=f1, unmatched_truth=unmatched)


def emit_markup(doc: Document, verdicts: list[Verdict]) -> str:
    """Render the document as HTML with claim spans wrapped in status
    elements carrying the top candidate's description and value."""
    by_sentence: dict[int, list[Verdict]] = {}
    for v in verdicts:
        by_sentence.setdefault(v.sentence_index, []).append(v)

    def render_sentence(sent) -> str:
        marks = sorted(by_sentence.get(sent.index, []), key=lambda v: v.span[0])
        out = []
        cursor = 0
        for v in marks:
            start, end = v.span
            if start < cursor:
                continue
            out.append(html.escape(sent.text[cursor:start]))
            top_nl = v.top_k[0].nl if v.top_k else ""
            top_value = v.top_k[0].value if v.top_k else None
            attrs = (
                f'class="{v.status}" data-claim-id="{v.claim_id}"'
                f' data-probability="{v.correctness_probability:.6f}"'
                f' data-top-nl="{html.escape(top_nl, quote=True)}"'
                f' data-top-value="{"" if top_value is None else top_value}"'
            )
            out.append(f"<span {attrs}>{html.escape(sent.text[start:end])}</span>")
            cursor = end
        out.append(html.escape(sent.text[cursor:]))
        return "".join(out)

    parts: list[str] = []

    def visit(section: Section):
        if section.headline:
            level = min(6, max(1, section.level))
            parts.append(f"<h{level}>{html.escape(section.headline)}</h{level}>")
        for para in section.paragraphs:
            rendered = " ".join(render_sentence(s) for s in para.sentences)
            parts.append(f"<p>{rendered}</p>")
        for child in section.children:
            visit(child)

    visit(doc.root)
    return "\n".join(parts)
