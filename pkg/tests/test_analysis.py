import numpy as np
import pytest

from ugpig.analysis import (
    SECOND_LEVEL_CATEGORIES,
    Direction,
    PatternTaxonomy,
    build_plan_report,
    classify_direction,
    coincidence_degree,
    planning_accuracy,
    read_region_patterns_tsv,
    read_taxonomy_tsv,
    top_relations_per_intent,
    write_taxonomy_tsv,
)

from conftest import random_graph
from test_model import make_params


class TestTopRelationsPerIntent:
    def test_uniform_weights_fall_back_to_index_order(self, rng):
        graph = random_graph(rng, num_relations=6)
        params = make_params(graph, 4, 8, 3, 2, rng, randomize=False)
        names = [f"rel{i}" for i in range(6)]
        rows = top_relations_per_intent(params, names, 4)
        assert rows == [["rel0", "rel1", "rel2", "rel3"]] * 3

    def test_dominant_relation_ranks_first(self, rng):
        graph = random_graph(rng, num_relations=5)
        params = make_params(graph, 4, 8, 2, 2, rng, randomize=False)
        params.intent_weights[3, 0] = 5.0
        params.intent_weights[1, 1] = 5.0
        rows = top_relations_per_intent(params, [f"rel{i}" for i in range(5)], 3)
        assert rows[0][0] == "rel3"
        assert rows[1][0] == "rel1"

    def test_table_shape(self, rng):
        graph = random_graph(rng, num_relations=29)
        params = make_params(graph, 4, 8, 4, 2, rng)
        rows = top_relations_per_intent(params, [f"r{i}" for i in range(29)], 5)
        assert len(rows) == 4
        assert all(len(row) == 5 for row in rows)
        assert all(len(set(row)) == 5 for row in rows)

    def test_ranking_invariant_under_column_shift(self, rng):
        graph = random_graph(rng, num_relations=7)
        params = make_params(graph, 4, 8, 3, 2, rng)
        names = [f"rel{i}" for i in range(7)]
        before = top_relations_per_intent(params, names, 7)
        params.intent_weights[:, 1] += 13.5
        after = top_relations_per_intent(params, names, 7)
        assert before == after

    def test_k_bounded_by_relation_count(self, rng):
        graph = random_graph(rng, num_relations=3)
        params = make_params(graph, 4, 8, 2, 2, rng)
        with pytest.raises(ValueError):
            top_relations_per_intent(params, ["a", "b", "c"], 4)


class TestCoincidenceDegree:
    def test_one_third_overlap(self):
        past = {
            "Ecological Restoration and Governance",
            "Ecological Agriculture",
            "Green Consumption",
        }
        recommended = {"Nature Conservation", "Ecological Agriculture", "New Urbanization"}
        cd = coincidence_degree(past, recommended)
        assert cd == pytest.approx(1 / 3, abs=1e-12)
        assert cd * 100 == pytest.approx(33.33, abs=0.01)

    def test_full_containment(self):
        assert coincidence_degree({"a"}, {"a", "b"}) == 1.0

    def test_disjoint(self):
        assert coincidence_degree({"a"}, {"b"}) == 0.0

    def test_empty_past_rejected(self):
        with pytest.raises(ValueError):
            coincidence_degree(set(), {"a"})

    def test_bounds_and_extremes(self, rng):
        universe = list("abcdef")
        for _ in range(100):
            past = set(rng.choice(universe, size=int(rng.integers(1, 5)), replace=False))
            rec = set(rng.choice(universe, size=int(rng.integers(0, 5)), replace=False))
            cd = coincidence_degree(past, rec)
            assert 0.0 <= cd <= 1.0
            assert (cd == 1.0) == past.issubset(rec)
            assert (cd == 0.0) == (not past & rec)


class TestClassifyDirection:
    @pytest.mark.parametrize(
        "cd,expected",
        [
            (1.0, Direction.CLEARLY_ORIENTED),
            (0.75, Direction.UNHURRIEDLY_ADJUSTABLE),
            (0.51, Direction.UNHURRIEDLY_ADJUSTABLE),
            (0.5, Direction.EXPECTANTLY_TRANSITIONAL),
            (1 / 3, Direction.EXPECTANTLY_TRANSITIONAL),
            (0.1, Direction.EXPECTANTLY_TRANSITIONAL),
            (0.0, Direction.URGENTLY_TRANSITIONAL),
        ],
    )
    def test_thresholds(self, cd, expected):
        assert classify_direction(cd) == expected

    def test_out_of_range_rejected(self):
        for bad in (-0.1, 1.1):
            with pytest.raises(ValueError):
                classify_direction(bad)

    def test_monotone(self):
        order = [
            Direction.URGENTLY_TRANSITIONAL,
            Direction.EXPECTANTLY_TRANSITIONAL,
            Direction.UNHURRIEDLY_ADJUSTABLE,
            Direction.CLEARLY_ORIENTED,
        ]
        ranks = [order.index(classify_direction(cd)) for cd in np.linspace(0, 1, 101)]
        assert ranks == sorted(ranks)


class TestPlanningAccuracy:
    def test_full_containment(self):
        topk = {"d1": {"a", "b"}, "d2": {"c", "d"}}
        gov = {"d1": {"a", "b", "x"}, "d2": {"c", "d", "y"}}
        assert planning_accuracy(topk, gov, k=2) == pytest.approx(1.0)

    def test_empty_gov_sets(self):
        topk = {"d1": {"a"}, "d2": {"b"}}
        gov = {"d1": set(), "d2": set()}
        assert planning_accuracy(topk, gov) == 0.0

    def test_half_overlap(self):
        topk = {"d1": {"a", "b", "c"}, "d2": {"d", "e"}}
        gov = {"d1": {"a", "b", "c"}, "d2": {"d", "e"}}
        # overlaps 3 and 2 over 5 * 2 slots
        assert planning_accuracy(topk, gov) == pytest.approx(0.5)

    def test_region_mismatch_rejected(self):
        with pytest.raises(ValueError):
            planning_accuracy({"d1": {"a"}}, {"d2": {"a"}})

    def test_oversized_recommendation_rejected(self):
        with pytest.raises(ValueError):
            planning_accuracy({"d1": {"a", "b"}}, {"d1": {"a"}}, k=1)

    def test_region_order_invariant(self, rng):
        regions = [f"d{i}" for i in range(6)]
        topk = {d: set(rng.choice(list("abcdefgh"), size=5, replace=False)) for d in regions}
        gov = {d: set(rng.choice(list("abcdefgh"), size=3, replace=False)) for d in regions}
        forward = planning_accuracy(topk, gov)
        backward = planning_accuracy(
            dict(reversed(list(topk.items()))), dict(reversed(list(gov.items())))
        )
        assert forward == backward


class TestPatternTaxonomy:
    def test_unknown_category_rejected(self):
        with pytest.raises(ValueError):
            PatternTaxonomy({"i1": "Astro Mining"})

    def test_catalog_coverage_check(self):
        taxonomy = PatternTaxonomy({"i1": SECOND_LEVEL_CATEGORIES[0]})
        taxonomy.validate_catalog(["i1"])
        with pytest.raises(ValueError):
            taxonomy.validate_catalog(["i1", "i2"])

    def test_file_round_trip(self, tmp_path):
        taxonomy = PatternTaxonomy(
            {f"i{k}": SECOND_LEVEL_CATEGORIES[k % 6] for k in range(10)}
        )
        path = tmp_path / "taxonomy.tsv"
        write_taxonomy_tsv(path, taxonomy)
        loaded = read_taxonomy_tsv(path)
        assert all(loaded.category_of(f"i{k}") == taxonomy.category_of(f"i{k}") for k in range(10))


class TestPlanReport:
    def test_rows_and_accuracy(self):
        taxonomy = PatternTaxonomy(
            {
                "i1": "Ecological Agriculture",
                "i2": "Nature Conservation",
                "i3": "Green Consumption",
            }
        )
        recommended = {"d1": ["i1", "i2"], "d2": ["i3"]}
        history = {"d1": {"i1"}, "d2": set()}
        gov = {"d1": {"i1"}, "d2": {"i3"}}
        report = build_plan_report(recommended, history, taxonomy, gov, k=2)
        by_region = {row.region: row for row in report.rows}
        assert by_region["d1"].direction == Direction.CLEARLY_ORIENTED
        assert by_region["d2"].coincidence is None
        assert report.accuracy == pytest.approx(2 / 4)
        text = report.to_text()
        assert "no history" in text

    def test_region_patterns_tsv(self, tmp_path):
        path = tmp_path / "gov.tsv"
        path.write_text("d1\ti1\nd1\ti2\nd2\ti3\n", encoding="utf-8")
        sets = read_region_patterns_tsv(path)
        assert sets == {"d1": {"i1", "i2"}, "d2": {"i3"}}
