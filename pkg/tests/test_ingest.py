import math

import numpy as np
import pytest

from ugpig import ingest, kg
from ugpig.ingest import (
    BinSpec,
    ConfigurationError,
    FeatureRecord,
    FeatureSchema,
    FeatureSpec,
    IngestionError,
    SchemaError,
    build_user_graph,
    collect_feature_values,
    discretize,
    prune_graph,
    prune_user_graph,
    quantile_specs,
    resolve_bin_specs,
)

TOY_SCHEMA = FeatureSchema(
    (
        FeatureSpec("Soil", "Area.Soil", ingest.DISCRETE, "Geographical Location"),
        FeatureSpec("Gross GDP", "Area.GDP", ingest.CONTINUOUS, "Economic Development"),
        FeatureSpec("Dialects", "Area.Dialect", ingest.DISCRETE, "Cultural Factors", multivalued=True),
    )
)


class TestDefaultSchema:
    def test_shape(self):
        schema = ingest.DEFAULT_SCHEMA
        assert len(schema) == 29
        assert len(schema.continuous()) == 20
        assert len(schema.discrete()) == 9

    def test_category_partition(self):
        counts = {}
        for entry in ingest.DEFAULT_SCHEMA:
            counts[entry.category] = counts.get(entry.category, 0) + 1
        assert counts == {
            "Geographical Location": 8,
            "Richness of Resources": 4,
            "Economic Development": 5,
            "Environmental Friendliness": 5,
            "Social Development": 3,
            "Cultural Factors": 4,
        }

    def test_relations_unique(self):
        relations = [e.relation for e in ingest.DEFAULT_SCHEMA]
        assert len(set(relations)) == 29


class TestBuildUserGraph:
    def test_discrete_values_share_a_node(self):
        records = [
            FeatureRecord("u1", {"Soil": "red"}),
            FeatureRecord("u2", {"Soil": "red"}),
        ]
        graph = build_user_graph(records, TOY_SCHEMA)
        assert graph.num_entities == 3
        assert graph.num_triples == 2
        soil = graph.entities.id_of("Area.Soil=red")
        assert graph.degree(soil) == 2

    def test_continuous_values_stay_isolated(self):
        records = [
            FeatureRecord("u1", {"Gross GDP": 100.2}),
            FeatureRecord("u2", {"Gross GDP": 100.5}),
        ]
        graph = build_user_graph(records, TOY_SCHEMA)
        assert graph.num_entities == 4
        assert graph.num_triples == 2

    def test_multivalued_emits_one_triple_per_value(self):
        records = [FeatureRecord("u1", {"Dialects": ["min", "hakka"]})]
        graph = build_user_graph(records, TOY_SCHEMA)
        assert graph.num_triples == 2

    def test_missing_values_skipped(self):
        records = [FeatureRecord("u1", {"Soil": "red"})]
        graph = build_user_graph(records, TOY_SCHEMA)
        assert graph.num_triples == 1

    def test_duplicate_region_rejected(self):
        records = [FeatureRecord("u1", {}), FeatureRecord("u1", {})]
        with pytest.raises(IngestionError):
            build_user_graph(records, TOY_SCHEMA)

    def test_kind_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            build_user_graph([FeatureRecord("u1", {"Gross GDP": "rich"})], TOY_SCHEMA)
        with pytest.raises(SchemaError):
            build_user_graph([FeatureRecord("u1", {"Soil": 1.5})], TOY_SCHEMA)

    def test_non_finite_continuous_rejected(self):
        with pytest.raises(SchemaError):
            build_user_graph([FeatureRecord("u1", {"Gross GDP": float("nan")})], TOY_SCHEMA)

    def test_regions_form_dense_prefix(self):
        records = [
            FeatureRecord("u1", {"Soil": "red"}),
            FeatureRecord("u2", {"Soil": "black"}),
            FeatureRecord("u3", {}),
        ]
        graph = build_user_graph(records, TOY_SCHEMA)
        assert graph.region_ids() == [0, 1, 2]


class TestDiscretize:
    HABITAT_BINS = BinSpec("Area.BiologyHabitat", edges=(1.0, 3.0, 5.0))

    @pytest.mark.parametrize(
        "value,label",
        [(0, "L1"), (1, "L2"), (2, "L2"), (3, "L3"), (4, "L3"), (5, "L4"), (7, "L4")],
    )
    def test_four_level_example(self, value, label):
        assert discretize(value, self.HABITAT_BINS) == label

    def test_rejects_non_finite(self):
        for bad in (float("nan"), float("inf"), -float("inf")):
            with pytest.raises(ValueError):
                discretize(bad, self.HABITAT_BINS)

    def test_monotone_step_function(self, rng):
        edges = tuple(sorted(rng.normal(size=4)))
        spec = BinSpec("f", edges=edges)
        values = sorted(rng.normal(size=200) * 3)
        labels = [int(discretize(v, spec)[1:]) for v in values]
        assert labels == sorted(labels)
        assert set(labels) <= set(range(1, 6))

    def test_unresolved_spec_rejected(self):
        with pytest.raises(ConfigurationError):
            discretize(1.0, BinSpec("f", quantiles=4))

    def test_invalid_edges_rejected(self):
        with pytest.raises(ConfigurationError):
            BinSpec("f", edges=(3.0, 1.0))
        with pytest.raises(ConfigurationError):
            BinSpec("f", edges=())
        with pytest.raises(ConfigurationError):
            BinSpec("f", quantiles=1)
        with pytest.raises(ConfigurationError):
            BinSpec("f")


class TestResolveBinSpecs:
    def test_quartile_edges(self):
        values = list(range(1, 9))  # 1..8
        resolved = resolve_bin_specs([BinSpec("f", quantiles=4)], {"f": values})
        assert resolved["f"].edges == tuple(np.quantile(values, [0.25, 0.5, 0.75]))

    def test_constant_corpus_rejected(self):
        with pytest.raises(ConfigurationError):
            resolve_bin_specs([BinSpec("f", quantiles=4)], {"f": [2.0] * 10})

    def test_missing_corpus_rejected(self):
        with pytest.raises(ConfigurationError):
            resolve_bin_specs([BinSpec("f", quantiles=4)], {})


def two_region_gdp_graph():
    records = [
        FeatureRecord("u1", {"Gross GDP": 100.2}),
        FeatureRecord("u2", {"Gross GDP": 100.5}),
    ]
    return build_user_graph(records, TOY_SCHEMA)


class TestPruneGraph:
    def test_same_bin_values_merge(self):
        graph = two_region_gdp_graph()
        specs = {"Area.GDP": BinSpec("Area.GDP", edges=(200.0,))}
        pruned, report = prune_graph(graph, specs)
        assert pruned.num_entities == 3  # 2 regions + 1 level node
        level = pruned.entities.id_of("Area.GDP:L1")
        assert pruned.kind_of(level) == kg.EntityKind.LEVEL_NODE
        assert pruned.degree(level) == 2
        assert report.nodes_removed == 2
        assert report.nodes_created == 1
        assert report.stats_after.density > report.stats_before.density

    def test_discrete_only_graph_is_copied(self):
        records = [FeatureRecord("u1", {"Soil": "red"}), FeatureRecord("u2", {"Soil": "red"})]
        graph = build_user_graph(records, TOY_SCHEMA)
        pruned, report = prune_graph(graph, {})
        assert pruned.num_triples == graph.num_triples
        assert pruned.entities.names() == graph.entities.names()
        assert report.nodes_removed == 0
        assert report.nodes_created == 0

    def test_relation_vocabulary_preserved(self):
        graph = two_region_gdp_graph()
        pruned, _ = prune_graph(graph, {"Area.GDP": BinSpec("Area.GDP", edges=(200.0,))})
        assert pruned.relations.names() == graph.relations.names()

    def test_region_degrees_preserved(self, rng):
        records = [
            FeatureRecord(f"u{i}", {"Soil": f"s{i % 2}", "Gross GDP": float(rng.integers(100))})
            for i in range(10)
        ]
        graph = build_user_graph(records, TOY_SCHEMA)
        specs = {"Area.GDP": BinSpec("Area.GDP", edges=(25.0, 50.0, 75.0))}
        pruned, _ = prune_graph(graph, specs)
        for i in range(10):
            region = pruned.entities.id_of(f"u{i}")
            assert pruned.degree(region) == graph.degree(graph.entities.id_of(f"u{i}"))

    def test_idempotent(self):
        graph = two_region_gdp_graph()
        specs = {"Area.GDP": BinSpec("Area.GDP", edges=(200.0,))}
        once, _ = prune_graph(graph, specs)
        twice, report = prune_graph(once, specs)
        assert twice.entities.names() == once.entities.names()
        assert twice.triples == once.triples
        assert report.nodes_removed == 0

    def test_same_bin_creates_length_two_path(self):
        graph = two_region_gdp_graph()
        pruned, _ = prune_graph(graph, {"Area.GDP": BinSpec("Area.GDP", edges=(200.0,))})
        u1 = pruned.entities.id_of("u1")
        u2 = pruned.entities.id_of("u2")
        mid = {v for _, v in pruned.neighbors(u1)} & {v for _, v in pruned.neighbors(u2)}
        assert mid

    def test_unresolved_spec_rejected(self):
        graph = two_region_gdp_graph()
        with pytest.raises(ConfigurationError):
            prune_graph(graph, {"Area.GDP": BinSpec("Area.GDP", quantiles=4)})

    def test_missing_spec_for_continuous_feature_rejected(self):
        graph = two_region_gdp_graph()
        with pytest.raises(ConfigurationError):
            prune_user_graph(graph, TOY_SCHEMA, {})

    def test_isolated_regions_survive(self):
        records = [FeatureRecord("u1", {"Gross GDP": 5.0}), FeatureRecord("u2", {})]
        graph = build_user_graph(records, TOY_SCHEMA)
        pruned, _ = prune_graph(graph, {"Area.GDP": BinSpec("Area.GDP", edges=(1.0,))})
        assert "u2" in pruned.entities


class TestCollectFeatureValues:
    def test_values_parsed_per_edge(self):
        records = [
            FeatureRecord("u1", {"Gross GDP": 1.5}),
            FeatureRecord("u2", {"Gross GDP": 2.5}),
            FeatureRecord("u3", {"Gross GDP": 1.5}),
        ]
        graph = build_user_graph(records, TOY_SCHEMA)
        values = collect_feature_values(graph, ["Area.GDP"])
        assert sorted(values["Area.GDP"]) == [1.5, 1.5, 2.5]


class TestFeatureCsv:
    def test_round_trip(self, tmp_path):
        records = [
            FeatureRecord("u1", {"Soil": "red", "Gross GDP": 12.25, "Dialects": ["a", "b"]}),
            FeatureRecord("u2", {"Soil": "black"}),
        ]
        path = tmp_path / "features.csv"
        ingest.write_feature_csv(path, records, TOY_SCHEMA)
        loaded = ingest.read_feature_csv(path, TOY_SCHEMA)
        assert loaded[0].values["Gross GDP"] == 12.25
        assert loaded[0].values["Dialects"] == ["a", "b"]
        assert "Gross GDP" not in loaded[1].values

    def test_unknown_column_rejected(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("region,Bogus\nu1,x\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            ingest.read_feature_csv(path, TOY_SCHEMA)

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("region,Gross GDP\nu1,abc\n", encoding="utf-8")
        with pytest.raises(SchemaError):
            ingest.read_feature_csv(path, TOY_SCHEMA)


class TestBinSpecFile:
    def test_round_trip_exact_edges(self, tmp_path):
        specs = {
            "Area.GDP": BinSpec("Area.GDP", edges=(0.1, 0.30000000000000004, 7.5)),
            "Area.Altitude": BinSpec("Area.Altitude", quantiles=4),
        }
        path = tmp_path / "bins.toml"
        ingest.write_bin_specs(path, specs)
        loaded = ingest.read_bin_specs(path)
        assert loaded["Area.GDP"].edges == specs["Area.GDP"].edges
        assert loaded["Area.Altitude"].quantiles == 4

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "bins.toml"
        path.write_text('["Area.GDP"]\nnothing = 1\n', encoding="utf-8")
        with pytest.raises(ConfigurationError):
            ingest.read_bin_specs(path)
