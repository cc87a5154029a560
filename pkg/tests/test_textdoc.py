import pytest

from claimcheck.errors import MalformedMarkupError
from claimcheck.textdoc import (
    DistanceProvider,
    claim_keywords,
    detect_claims,
    ingest_document,
    load_parse_sidecar,
    parse_number,
    split_sentences,
)


class TestIngestDocument:
    def test_basic_html(self):
        doc = ingest_document("<h1>A</h1><p>X. Y.</p>")
        section = doc.root.children[0]
        assert section.headline == "A"
        assert len(section.paragraphs) == 1
        assert len(section.paragraphs[0].sentences) == 2

    def test_nested_sections(self):
        doc = ingest_document("<h1>Top</h1><p>a.</p><h2>Sub</h2><p>b.</p>")
        top = doc.root.children[0]
        assert top.headline == "Top"
        assert top.children[0].headline == "Sub"
        assert top.children[0].parent is top

    def test_plain_text_fallback(self):
        doc = ingest_document("First paragraph here.\n\nSecond one.")
        assert doc.root.headline == ""
        assert len(doc.root.paragraphs) == 2

    def test_canonical_sections(self):
        doc = ingest_document("# H\n\ntext one.\n\n## S\n\ntext two.")
        assert doc.root.children[0].headline == "H"
        assert doc.root.children[0].children[0].headline == "S"

    def test_unclosed_heading_is_malformed(self):
        with pytest.raises(MalformedMarkupError):
            ingest_document("<h1>never closed <p>text.</p>")

    def test_other_tags_stripped(self):
        doc = ingest_document("<p>a <b>bold</b> claim of 7 units.</p>")
        sent = doc.sentences[0]
        assert "bold" in sent.text


class TestSentenceSplitting:
    def test_abbreviation_guard(self):
        parts = split_sentences("Dr. Smith checked approx. twelve rows. Then left.")
        assert len(parts) == 2

    def test_decimal_not_split(self):
        parts = split_sentences("The rate was 0.040 overall. Done.")
        assert len(parts) == 2
        assert "0.040" in parts[0]


class TestDetectClaims:
    def _claims(self, text):
        doc = ingest_document(text)
        return doc, detect_claims(doc)

    def test_spelled_out_cardinal(self):
        doc, claims = self._claims("three were for repeated substance abuse.")
        assert len(claims) == 1
        assert claims[0].claimed_value == 3.0
        assert claims[0].exact_word is True

    def test_year_excluded(self):
        doc, claims = self._claims("in 2015 the rate fell to 7.")
        assert [c.claimed_value for c in claims] == [7.0]

    def test_percent_claim(self):
        doc, claims = self._claims("13% of respondents agreed.")
        assert len(claims) == 1
        claim = claims[0]
        assert claim.claimed_value == 13.0
        assert claim.is_percent is True
        assert claim.sig_digits == 2

    def test_ordinal_excluded(self):
        doc, claims = self._claims("The 2nd row shows 5 wins.")
        assert [c.claimed_value for c in claims] == [5.0]

    def test_dates_excluded(self):
        doc, claims = self._claims("Updated on Sept. 22, 2014 with 9 rows.")
        assert [c.claimed_value for c in claims] == [9.0]

    def test_idempotent_and_stable(self):
        doc, claims = self._claims("in 1990 there were four bans and 12 fines.")
        again = detect_claims(doc)
        assert claims == again
        assert [c.claimed_value for c in claims] == [4.0, 12.0]

    def test_digit_multiplier_compound(self):
        doc, claims = self._claims("about 3 million rows were scanned.")
        assert claims[0].claimed_value == 3_000_000.0
        assert claims[0].exact_word is False

    def test_identifiers_with_digits_are_not_claims(self):
        doc, claims = self._claims("the region3 group holds 42 accounts.")
        assert [c.claimed_value for c in claims] == [42.0]
        doc, claims = self._claims("3M reported 7 incidents.")
        assert [c.claimed_value for c in claims] == [7.0]


class TestParseNumber:
    def test_separated_integer(self):
        assert parse_number(["56,033"]) == (56033.0, 5, False, False)

    def test_spelled_word(self):
        assert parse_number(["four"]) == (4.0, 1, True, False)

    def test_trailing_zero_significant(self):
        assert parse_number(["0.040"]) == (0.04, 2, False, False)

    def test_percent_token(self):
        assert parse_number(["13%"]) == (13.0, 2, False, True)

    def test_compound_words(self):
        assert parse_number(["twenty-one"]) == (21.0, 2, True, False)
        assert parse_number(["two", "thousand"]) == (2000.0, 4, True, False)


class TestDistance:
    def test_surface(self):
        doc = ingest_document("a b c d e f.")
        sent = doc.sentences[0]
        provider = DistanceProvider()
        assert provider.distance(sent, 2, 5) == 3

    def test_adjacent_floor(self):
        doc = ingest_document("a b.")
        provider = DistanceProvider()
        assert provider.distance(doc.sentences[0], 0, 1) == 1
        assert provider.distance(doc.sentences[0], 1, 1) == 1

    def test_parsed_path_length(self):
        doc = ingest_document("a b c.")
        provider = DistanceProvider(mode="parsed", edges={0: [(1, 2), (2, 3)]})
        assert provider.distance(doc.sentences[0], 1, 3) == 2

    def test_parsed_missing_falls_back(self):
        doc = ingest_document("a b c d.")
        provider = DistanceProvider(mode="parsed", edges={})
        assert provider.distance(doc.sentences[0], 0, 3) == 3

    def test_sidecar_loader(self):
        provider = load_parse_sidecar(b'[[[0, 1], [1, 2]]]')
        assert provider.mode == "parsed"
        assert provider.edges[0] == [(0, 1), (1, 2)]


class TestClaimKeywords:
    def test_reciprocal_distance_weighting(self):
        # two claims in one sentence weight a shared keyword differently
        doc = ingest_document("three suspensions were about gambling, one was.")
        claims = detect_claims(doc)
        assert [c.claimed_value for c in claims] == [3.0, 1.0]
        edges = {0: [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)]}
        provider = DistanceProvider(mode="parsed", edges=edges)
        sent = doc.sentences[0]
        gambling_index = next(
            i for i, t in enumerate(sent.tokens) if t.text == "gambling")
        d_three = provider.distance(sent, gambling_index, claims[0].token_start)
        d_one = provider.distance(sent, gambling_index, claims[1].token_start)
        k_three = claim_keywords(claims[0], doc, provider)
        k_one = claim_keywords(claims[1], doc, provider)
        assert k_three["gambling"] == pytest.approx(1.0 / d_three)
        assert k_one["gambling"] == pytest.approx(1.0 / d_one)

    def test_headline_weight(self):
        doc = ingest_document("# Gambling report\n\nExactly five bans.")
        claims = detect_claims(doc)
        keywords = claim_keywords(claims[0], doc, DistanceProvider())
        in_sentence = [w for t, w in keywords.items() if t in ("exactly", "bans")]
        w_min = min(in_sentence)
        assert keywords["gambling"] == pytest.approx(0.7 * w_min)
        assert keywords["report"] == pytest.approx(0.7 * w_min)

    def test_own_number_excluded_and_weights_bounded(self):
        doc = ingest_document("Exactly five bans.")
        claims = detect_claims(doc)
        keywords = claim_keywords(claims[0], doc, DistanceProvider())
        assert "five" not in keywords
        assert all(0.0 < w <= 1.0 for w in keywords.values())

    def test_one_sentence_paragraph_max_merge(self):
        # paragraph-first sentence is the claim sentence itself; the
        # max-weight merge keeps the in-sentence weights
        doc = ingest_document("Seven gambling bans happened.")
        claims = detect_claims(doc)
        keywords = claim_keywords(claims[0], doc, DistanceProvider())
        assert keywords["gambling"] == pytest.approx(1.0)

    def test_previous_sentence_contributes(self):
        doc = ingest_document("Lifetime bans were rare. Exactly four happened.")
        claims = detect_claims(doc)
        keywords = claim_keywords(claims[0], doc, DistanceProvider())
        w_min = min(keywords[t] for t in ("exactly", "happened"))
        assert keywords["lifetime"] == pytest.approx(0.4 * w_min)

    def test_context_strictly_below_strongest_in_sentence(self):
        doc = ingest_document("# Big headline words\n\nOld context here. gambling "
                              "claims reached nine overall.")
        claims = detect_claims(doc)
        keywords = claim_keywords(claims[0], doc, DistanceProvider())
        strongest = max(keywords.values())
        for term in ("big", "headline", "words", "old", "context"):
            assert keywords[term] < strongest
