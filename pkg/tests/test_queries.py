import math
import random

from hypothesis import given, strategies as st

from claimcheck.dataset import build_schema, load_csv
from claimcheck.queries import (
    AggFunction,
    AggColumnFragment,
    PredicateFragment,
    QueryCandidate,
    RoundingRule,
    STAR,
    canonical_equal,
    enumerate_candidates,
    parse_canonical_sql,
    render_query_nl,
    render_query_sql,
    round_matches,
    round_to_sig,
)


def rounding_oracle(value: float, digits: int) -> float:
    """Exact-rational half-away-from-zero rounding to significant digits."""
    if value == 0:
        return 0.0
    from fractions import Fraction

    magnitude = abs(Fraction(value))
    exponent = 0
    while magnitude >= 10:
        magnitude /= 10
        exponent += 1
    while magnitude < 1:
        magnitude *= 10
        exponent -= 1
    ulp = Fraction(10) ** (exponent - digits + 1)
    steps = math.floor(abs(Fraction(value)) / ulp + Fraction(1, 2))
    signed = steps * ulp * (1 if value > 0 else -1)
    return float(signed)


class FakeClaim:
    def __init__(self, value, sig=2, exact=False):
        self.claimed_value = value
        self.sig_digits = sig
        self.exact_word = exact


ANY_RULE = RoundingRule("any_sig_digits")
CLAIM_RULE = RoundingRule("claim_precision")


class TestRounding:
    def test_rounding_table_oracle(self):
        # oracle: rounding table over k=1..12 for the 13.6 case
        table = {k: round_to_sig(13.6, k) for k in range(1, 13)}
        assert table[1] == 10.0
        assert table[2] == 14.0
        assert all(v == 13.6 for k, v in table.items() if k >= 3)

    def test_result_rounds_to_claim(self):
        assert round_matches(13.6, FakeClaim(14.0), ANY_RULE) is True

    def test_no_k_matches(self):
        assert round_matches(13.6, FakeClaim(13.0), ANY_RULE) is False

    def test_exact_word_identity(self):
        assert round_matches(4.0, FakeClaim(4.0, sig=1, exact=True), ANY_RULE) is True

    def test_exact_word_requires_half_unit(self):
        assert round_matches(3.6, FakeClaim(4.0, sig=1, exact=True), ANY_RULE) is True
        assert round_matches(4.9, FakeClaim(5.0, sig=1, exact=True), ANY_RULE) is True
        # 40 rounds to 4e1, i.e. "40": not within half a unit of four
        assert round_matches(40.0, FakeClaim(4.0, sig=1, exact=True), ANY_RULE) is False

    def test_claim_precision_mode(self):
        # at the claim's own precision (2 digits) 13.44 rounds to 13
        assert round_matches(13.44, FakeClaim(13.0, sig=2), CLAIM_RULE) is True
        # but 13.6 rounds to 14 at 2 digits
        assert round_matches(13.6, FakeClaim(13.0, sig=2), CLAIM_RULE) is False
        assert round_matches(13.6, FakeClaim(14.0, sig=2), CLAIM_RULE) is True

    def test_half_away_from_zero(self):
        assert round_to_sig(0.25, 1) == 0.3
        assert round_to_sig(-0.25, 1) == -0.3
        assert round_to_sig(35.0, 1) == 40.0

    @given(st.floats(min_value=-1e9, max_value=1e9,
                     allow_nan=False, allow_infinity=False),
           st.integers(min_value=1, max_value=12))
    def test_round_trip_property(self, value, k):
        rounded = round_to_sig(value, k)
        assert round_matches(value, FakeClaim(rounded, sig=k), ANY_RULE) is True

    def test_matches_oracle_on_random_values(self):
        rng = random.Random(17)
        for _ in range(500):
            value = rng.uniform(-1e6, 1e6)
            k = rng.randint(1, 12)
            assert round_to_sig(value, k) == rounding_oracle(value, k)


def _pred(column, literal, table="t"):
    return PredicateFragment(table, column, literal)


class TestEnumerate:
    def test_count_star_with_one_predicate(self):
        candidates = list(enumerate_candidates(
            functions=[AggFunction.COUNT],
            targets=[STAR],
            predicates=[_pred("games", "indef")],
            pred_scores={},
            numeric_targets=frozenset(),
            m_preds=3,
        ))
        assert len(candidates) == 2
        assert candidates[0].predicates == ()
        assert candidates[1].predicates == (_pred("games", "indef"),)

    def test_text_target_excluded_for_sum(self):
        target = AggColumnFragment("t", "name")
        candidates = list(enumerate_candidates(
            functions=[AggFunction.SUM],
            targets=[target, STAR],
            predicates=[],
            pred_scores={},
            numeric_targets=frozenset(),  # nothing numeric
            m_preds=3,
        ))
        assert candidates == []

    def test_cartesian_count(self):
        # oracle: explicit enumeration count 2 x 2 x (1+2+1) = 16
        candidates = list(enumerate_candidates(
            functions=[AggFunction.COUNT, AggFunction.COUNT_DISTINCT],
            targets=[STAR, AggColumnFragment("t", "age")],
            predicates=[_pred("a", "x"), _pred("b", "y")],
            pred_scores={},
            numeric_targets=frozenset({("t", "age")}),
            m_preds=3,
        ))
        assert len(candidates) == 16

    def test_predicates_ordered_by_score(self):
        p1, p2 = _pred("a", "x"), _pred("b", "y")
        candidates = list(enumerate_candidates(
            functions=[AggFunction.CONDITIONAL_PROBABILITY],
            targets=[STAR],
            predicates=[p1, p2],
            pred_scores={p1: 0.1, p2: 5.0},
            numeric_targets=frozenset(),
            m_preds=3,
        ))
        pair = next(c for c in candidates if len(c.predicates) == 2)
        assert pair.predicates[0] == p2  # highest score is the condition

    def test_conditional_probability_needs_predicate(self):
        candidates = list(enumerate_candidates(
            functions=[AggFunction.CONDITIONAL_PROBABILITY],
            targets=[STAR],
            predicates=[],
            pred_scores={},
            numeric_targets=frozenset(),
            m_preds=3,
        ))
        assert candidates == []

    def test_one_predicate_per_column(self):
        p1, p2 = _pred("a", "x"), _pred("a", "y")
        candidates = list(enumerate_candidates(
            functions=[AggFunction.COUNT],
            targets=[STAR],
            predicates=[p1, p2],
            pred_scores={},
            numeric_targets=frozenset(),
            m_preds=3,
        ))
        assert all(len(c.predicates) <= 1 for c in candidates)

    def test_target_rules_hold_exhaustively(self):
        numeric = frozenset({("t", "age")})
        targets = [STAR, AggColumnFragment("t", "age")]
        candidates = enumerate_candidates(
            functions=list(AggFunction),
            targets=targets,
            predicates=[_pred("a", "x")],
            pred_scores={},
            numeric_targets=numeric,
            m_preds=3,
        )
        for c in candidates:
            if c.func in (AggFunction.SUM, AggFunction.AVG,
                          AggFunction.MIN, AggFunction.MAX):
                assert not c.target.is_star
                assert (c.target.table, c.target.column) in numeric
            if c.func is AggFunction.CONDITIONAL_PROBABILITY:
                assert len(c.predicates) >= 1


def _nfl_schema():
    table = load_csv(b"games,category\nindef,gambling\n4,conduct\n", "nflsuspensions")
    return build_schema([table], [])


class TestRendering:
    def test_sql_count_star(self):
        schema = _nfl_schema()
        cand = QueryCandidate(AggFunction.COUNT, STAR,
                              (_pred("games", "indef", "nflsuspensions"),))
        assert render_query_sql(cand, schema) == (
            "select count(*) from nflsuspensions where games = 'indef'"
        )

    def test_sql_avg_no_predicates(self):
        table = load_csv(b"salary\n10\n20\n", "t")
        schema = build_schema([table], [])
        cand = QueryCandidate(AggFunction.AVG, AggColumnFragment("t", "salary"), ())
        assert render_query_sql(cand, schema) == "select avg(salary) from t"

    def test_sql_preserves_candidate_order(self):
        schema = _nfl_schema()
        p1 = _pred("games", "indef", "nflsuspensions")
        p2 = _pred("category", "gambling", "nflsuspensions")
        cand = QueryCandidate(AggFunction.CONDITIONAL_PROBABILITY, STAR, (p1, p2))
        sql = render_query_sql(cand, schema)
        assert sql.index("games") < sql.index("category")

    def test_nl_templates(self):
        cand = QueryCandidate(AggFunction.COUNT, STAR,
                              (_pred("games", "indef"),))
        assert render_query_nl(cand) == "the number of rows where games is 'indef'"
        pct = QueryCandidate(AggFunction.PERCENTAGE, STAR,
                             (_pred("category", "gambling"),))
        assert render_query_nl(pct) == (
            "the percentage of rows where category is 'gambling'"
        )
        avg = QueryCandidate(AggFunction.AVG, AggColumnFragment("t", "age"), ())
        assert render_query_nl(avg) == "the average of age"

    def test_sql_parse_round_trip(self):
        schema = _nfl_schema()
        cand = QueryCandidate(AggFunction.COUNT, STAR,
                              (_pred("games", "indef", "nflsuspensions"),))
        parsed = parse_canonical_sql(render_query_sql(cand, schema), schema)
        assert canonical_equal(parsed, cand)

    def test_parse_paper_style_sql(self):
        schema = _nfl_schema()
        parsed = parse_canonical_sql(
            "SELECT Count(*) FROM nflsuspensions WHERE Games = 'indef'", schema)
        assert parsed.func is AggFunction.COUNT
        assert parsed.target.is_star
        assert parsed.predicates[0].literal == "indef"


class TestCanonicalEqual:
    def test_commutative_predicates(self):
        a = QueryCandidate(AggFunction.COUNT, STAR,
                           (_pred("a", "1"), _pred("b", "2")))
        b = QueryCandidate(AggFunction.COUNT, STAR,
                           (_pred("b", "2"), _pred("a", "1")))
        assert canonical_equal(a, b)

    def test_conditional_first_position_fixed(self):
        a = QueryCandidate(AggFunction.CONDITIONAL_PROBABILITY, STAR,
                           (_pred("a", "1"), _pred("b", "2")))
        b = QueryCandidate(AggFunction.CONDITIONAL_PROBABILITY, STAR,
                           (_pred("b", "2"), _pred("a", "1")))
        assert not canonical_equal(a, b)

    def test_differing_functions(self):
        a = QueryCandidate(AggFunction.COUNT, STAR, ())
        b = QueryCandidate(AggFunction.COUNT_DISTINCT, STAR, ())
        assert not canonical_equal(a, b)

    @given(st.permutations([("a", "1"), ("b", "2"), ("c", "3")]),
           st.sampled_from([AggFunction.COUNT, AggFunction.SUM,
                            AggFunction.PERCENTAGE]))
    def test_equivalence_under_permutation(self, perm, func):
        target = (AggColumnFragment("t", "age")
                  if func is AggFunction.SUM else STAR)
        base = QueryCandidate(func, target,
                              tuple(_pred(c, v) for c, v in [("a", "1"), ("b", "2"), ("c", "3")]))
        other = QueryCandidate(func, target, tuple(_pred(c, v) for c, v in perm))
        assert canonical_equal(base, base)  # reflexive
        assert canonical_equal(base, other) == canonical_equal(other, base)
        assert canonical_equal(base, other)
