import pytest

from claimcheck.cube import (
    ANY,
    CostBudget,
    CubeKey,
    DEFAULT,
    EngineStats,
    EvalScope,
    NO_VALUE,
    ResultCache,
    compute_cube,
    dim_groups,
    in_or_default,
    lookup_candidate,
    materialize_join,
    n_group_size,
    pick_scope,
    refine_by_eval,
)
from claimcheck.dataset import ForeignKey, build_schema, join_plan, load_csv
from claimcheck.errors import BudgetTooSmallError, NotCoveredError, TypeMismatchError
from claimcheck.queries import (
    AggFunction,
    AggColumnFragment,
    PredicateFragment,
    QueryCandidate,
    RoundingRule,
    STAR,
)
from oracle import naive_value

NFL_CSV = b"""player,games,category
a,indef,"substance abuse, repeated offense"
b,indef,"substance abuse, repeated offense"
c,indef,"substance abuse, repeated offense"
d,indef,gambling
e,10,substance abuse
f,4,personal conduct
"""

GAMES = ("nflsuspensions", "games")
CATEGORY = ("nflsuspensions", "category")
SA_REP = "substance abuse, repeated offense"


def nfl_view():
    table = load_csv(NFL_CSV, "nflsuspensions")
    schema = build_schema([table], [])
    return materialize_join(schema, join_plan(schema, {"nflsuspensions"}))


def _pred(column, literal, table="nflsuspensions"):
    return PredicateFragment(table, column, literal)


class TestInOrDefault:
    def test_collapse_to_default(self):
        mapped = in_or_default(["gambling", "conduct", "conduct"], {"gambling"})
        assert mapped == ["gambling", DEFAULT, DEFAULT]

    def test_identity_when_all_kept(self):
        values = ["a", "b"]
        assert in_or_default(values, {"a", "b"}) == values

    def test_empty_kept_all_default(self):
        assert in_or_default(["a", None], ()) == [DEFAULT, DEFAULT]


class TestComputeCube:
    def _cube(self, aggregates, dims=(GAMES, CATEGORY)):
        view = nfl_view()
        kept = {
            GAMES: ("indef",),
            CATEGORY: (SA_REP, "gambling"),
        }
        return view, compute_cube(view, dims, kept, aggregates)

    def test_count_star_entries_match_oracle(self):
        # oracle: brute-force row filters on the fixture
        view, results = self._cube([(AggFunction.COUNT, STAR)])
        result = results[CubeKey(AggFunction.COUNT, STAR, (GAMES, CATEGORY))]
        oracle_indef = naive_value(view, QueryCandidate(
            AggFunction.COUNT, STAR, (_pred("games", "indef"),)))
        assert oracle_indef == 4
        assert result.value(("indef", ANY)) == oracle_indef
        oracle_both = naive_value(view, QueryCandidate(
            AggFunction.COUNT, STAR,
            (_pred("games", "indef"), _pred("category", "gambling"))))
        assert oracle_both == 1
        assert result.value(("indef", "gambling")) == oracle_both
        assert result.value((ANY, ANY)) == view.row_count == 6

    def test_cube_consistency_rollup(self):
        # the '*' entry equals the sum over kept literals plus DEFAULT
        view, results = self._cube([(AggFunction.COUNT, STAR)])
        result = results[CubeKey(AggFunction.COUNT, STAR, (GAMES, CATEGORY))]
        for cat in (SA_REP, "gambling", DEFAULT, ANY):
            total = sum(result.value((g, cat)) for g in ("indef", DEFAULT))
            assert result.value((ANY, cat)) == total

    def test_every_lattice_assignment_defined(self):
        view, results = self._cube([(AggFunction.COUNT, STAR)])
        result = results[CubeKey(AggFunction.COUNT, STAR, (GAMES, CATEGORY))]
        for g in ("indef", DEFAULT, ANY):
            for cat in (SA_REP, "gambling", DEFAULT, ANY):
                assert isinstance(result.value((g, cat)), int)

    def test_numeric_aggregates_and_novalue(self):
        table = load_csv(b"grp,x\na,1\na,\nb,2\nb,4\n", "t")
        schema = build_schema([table], [])
        view = materialize_join(schema, join_plan(schema, {"t"}))
        target = AggColumnFragment("t", "x")
        aggs = [(AggFunction.SUM, target), (AggFunction.AVG, target),
                (AggFunction.MIN, target), (AggFunction.MAX, target),
                (AggFunction.COUNT, target)]
        results = compute_cube(view, (("t", "grp"),), {("t", "grp"): ("a",)}, aggs)
        avg = results[CubeKey(AggFunction.AVG, target, (("t", "grp"),))]
        assert avg.value(("a",)) == 1.0  # missing cell ignored
        cnt = results[CubeKey(AggFunction.COUNT, target, (("t", "grp"),))]
        assert cnt.value(("a",)) == 1
        assert cnt.value((DEFAULT,)) == 2
        # a group that never occurs: counts 0, numeric aggregates NO_VALUE
        assert cnt.value(("zzz",)) == 0
        assert avg.value(("zzz",)) is NO_VALUE

    def test_type_mismatch(self):
        view = nfl_view()
        with pytest.raises(TypeMismatchError):
            compute_cube(view, (GAMES,), {GAMES: ("indef",)},
                         [(AggFunction.SUM, AggColumnFragment("nflsuspensions",
                                                              "category"))])


class TestLookup:
    def _cache(self):
        view = nfl_view()
        kept = {GAMES: ("indef",), CATEGORY: (SA_REP, "gambling")}
        cache = ResultCache()
        results = compute_cube(view, (CATEGORY, GAMES), kept,
                               [(AggFunction.COUNT, STAR)])
        for key, result in results.items():
            cache.put(key, result)
        return view, cache, [(CATEGORY, GAMES)]

    def test_conditional_probability(self):
        # oracle: footnote formula over brute-force counts = 100 * 1 / 4
        view, cache, groups = self._cache()
        cand = QueryCandidate(
            AggFunction.CONDITIONAL_PROBABILITY, STAR,
            (_pred("games", "indef"), _pred("category", "gambling")))
        numerator = naive_value(view, QueryCandidate(AggFunction.COUNT, STAR,
                                                     cand.predicates))
        condition = naive_value(view, QueryCandidate(AggFunction.COUNT, STAR,
                                                     cand.predicates[:1]))
        assert (numerator, condition) == (1, 4)
        assert lookup_candidate(cache, cand, groups) == pytest.approx(100.0 / 4)
        assert naive_value(view, cand) == pytest.approx(25.0)

    def test_percentage(self):
        # oracle: brute force 100 * 1 / 6
        view, cache, groups = self._cache()
        cand = QueryCandidate(AggFunction.PERCENTAGE, STAR,
                              (_pred("category", "gambling"),))
        assert lookup_candidate(cache, cand, groups) == pytest.approx(100.0 / 6)
        assert naive_value(view, cand) == pytest.approx(100.0 / 6)

    def test_grand_total(self):
        view, cache, groups = self._cache()
        cand = QueryCandidate(AggFunction.COUNT, STAR, ())
        assert lookup_candidate(cache, cand, groups) == 6

    def test_not_covered(self):
        view, cache, groups = self._cache()
        cand = QueryCandidate(AggFunction.COUNT, STAR,
                              (_pred("player", "a"),))
        with pytest.raises(NotCoveredError):
            lookup_candidate(cache, cand, groups)


class TestJoin:
    def test_two_table_join(self):
        orders = load_csv(b"id,region_id,amount\n1,10,5\n2,10,7\n3,20,1\n", "orders")
        regions = load_csv(b"id,name\n10,north\n20,south\n", "regions")
        schema = build_schema([orders, regions],
                              [ForeignKey("orders", "region_id", "regions", "id")])
        view = materialize_join(schema, join_plan(schema, {"orders", "regions"}))
        assert view.row_count == 3
        assert view.values(("regions", "name")) == ["north", "north", "south"]

    def test_dangling_fk_rows_drop(self):
        orders = load_csv(b"id,region_id\n1,10\n2,99\n", "orders")
        regions = load_csv(b"id\n10\n", "regions")
        schema = build_schema([orders, regions],
                              [ForeignKey("orders", "region_id", "regions", "id")])
        view = materialize_join(schema, join_plan(schema, {"orders", "regions"}))
        assert view.row_count == 1


class TestScopeAndRefine:
    def test_n_group_size(self):
        assert n_group_size(5, 3) == 3
        assert n_group_size(2, 3) == 2
        assert n_group_size(0, 3) == 0
        assert n_group_size(5, 3, rule="literal") == 4  # max(3, 5-1)

    def test_dim_group_count(self):
        # oracle: subset count C(5, 3) = 10
        scope = EvalScope(
            functions=tuple(AggFunction), targets=(STAR,),
            restrict_columns=tuple(("t", f"c{i}") for i in range(5)),
            kept_literals={}, n_dims=3)
        groups = dim_groups(scope)
        assert len(groups) == 10
        assert len(set(groups)) == 10

    def test_small_restrict_single_group(self):
        scope = EvalScope(
            functions=tuple(AggFunction), targets=(STAR,),
            restrict_columns=(("t", "a"), ("t", "b")),
            kept_literals={}, n_dims=2)
        assert dim_groups(scope) == [(("t", "a"), ("t", "b"))]

    def test_pick_scope_under_budget(self):
        scope = pick_scope(
            targets=[STAR],
            kept_literals={GAMES: ("indef",)},
            column_marginals={GAMES: 1.0},
            numeric_targets=frozenset(),
            view_row_count=100,
            budget=CostBudget(10_000_000),
        )
        assert scope.restrict_columns == (GAMES,)

    def test_pick_scope_truncates_lowest_marginal(self):
        # 2 basis pairs x C(n, min(3, n)) groups x 100 rows: the fourth
        # column lifts group count from 1 to 4, blowing the budget, so the
        # lowest-marginal column drops first
        marginals = {("t", "a"): 5.0, ("t", "b"): 4.0,
                     ("t", "c"): 3.0, ("t", "weak"): 0.2}
        scope = pick_scope(
            targets=[STAR],
            kept_literals={c: ("v",) for c in marginals},
            column_marginals=marginals,
            numeric_targets=frozenset(),
            view_row_count=100,
            budget=CostBudget(250),
        )
        assert scope.restrict_columns == (("t", "a"), ("t", "b"), ("t", "c"))

    def test_budget_too_small(self):
        with pytest.raises(BudgetTooSmallError):
            pick_scope(
                targets=[STAR], kept_literals={}, column_marginals={},
                numeric_targets=frozenset(), view_row_count=100,
                budget=CostBudget(99),
            )

    def _run_refine(self, cache=None):
        view = nfl_view()
        scope = EvalScope(
            functions=tuple(AggFunction),
            targets=(STAR,),
            restrict_columns=(CATEGORY, GAMES),
            kept_literals={GAMES: ("indef",), CATEGORY: ("gambling",)},
            n_dims=2,
        )
        claim = type("C", (), {"claimed_value": 4.0, "sig_digits": 1,
                               "exact_word": True})()
        candidates = [
            QueryCandidate(AggFunction.COUNT, STAR, ()),
            QueryCandidate(AggFunction.COUNT, STAR, (_pred("games", "indef"),)),
            QueryCandidate(AggFunction.PERCENTAGE, STAR,
                           (_pred("category", "gambling"),)),
        ]
        cache = cache if cache is not None else ResultCache()
        stats = EngineStats()
        outcomes, values = refine_by_eval(
            {0: candidates}, {0: claim}, view, scope, cache,
            RoundingRule("any_sig_digits"), frozenset(), stats)
        return candidates, outcomes, values, cache, stats

    def test_outcomes_and_values(self):
        candidates, outcomes, values, cache, stats = self._run_refine()
        assert outcomes[0][candidates[0]] == "mismatch"  # 6 vs four
        assert outcomes[0][candidates[1]] == "match"  # 4
        assert values[0][candidates[1]] == 4
        assert values[0][candidates[2]] == pytest.approx(100.0 / 6)

    def test_warm_cache_identical_and_free(self):
        candidates, outcomes1, values1, cache, stats1 = self._run_refine()
        # second run against the warm cache: zero computations, same answers
        candidates2, outcomes2, values2, cache2, stats2 = self._run_refine(cache)
        assert stats2.cube_scans == 0
        assert stats2.cube_keys_computed == 0
        assert values2 == values1
        assert outcomes2 == outcomes1
        assert cache2.hits > 0
