import numpy as np
import pytest

from ugpig.analysis import SECOND_LEVEL_CATEGORIES
from ugpig.ingest import DEFAULT_SCHEMA, build_user_graph
from ugpig.synth import SynthConfig, generate_synthetic


def small_cfg(**overrides):
    defaults = dict(
        num_regions=120, num_items=18, num_latent_factors=3,
        interactions_per_region=4.0, noise_rate=0.1, seed=7,
    )
    defaults.update(overrides)
    return SynthConfig(**defaults)


class TestSynthConfig:
    def test_template_defaults(self):
        cfg = SynthConfig()
        assert (cfg.num_regions, cfg.num_items) == (2596, 94)
        assert cfg.interactions_per_region == 3.0

    def test_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(num_regions=0)
        with pytest.raises(ValueError):
            SynthConfig(noise_rate=1.5)


class TestGenerateSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(small_cfg())
        b = generate_synthetic(small_cfg())
        assert a.records == b.records
        assert a.interactions == b.interactions

    def test_records_cover_schema(self):
        data = generate_synthetic(small_cfg())
        assert len(data.records) == 120
        for record in data.records[:10]:
            assert set(record.values) == {e.feature for e in DEFAULT_SCHEMA}

    def test_interaction_scale_matches_template(self):
        data = generate_synthetic(SynthConfig(seed=3))
        # 2596 regions at ~3 each, minus dedup/zero draws
        assert 7_000 <= data.interactions.num_interactions <= 8_600

    def test_taxonomy_total_over_catalog(self):
        data = generate_synthetic(small_cfg())
        for name in data.item_names:
            assert data.taxonomy.category_of(name) in SECOND_LEVEL_CATEGORIES

    def test_builds_full_user_graph(self):
        data = generate_synthetic(small_cfg())
        graph = build_user_graph(data.records, data.schema)
        # one triple per single-valued feature, extras from multivalued lists
        assert graph.num_triples >= 120 * 29

    def test_pure_noise_flattens_item_frequencies(self):
        clean = generate_synthetic(small_cfg(noise_rate=0.0, seed=5))
        noisy = generate_synthetic(small_cfg(noise_rate=1.0, seed=5))

        def counts(data):
            totals = np.zeros(18)
            for _, item in data.interactions.pairs():
                totals[item] += 1
            return totals

        noisy_counts = counts(noisy)
        assert noisy_counts.max() / noisy_counts.sum() < 3.0 / 18
        assert counts(clean).max() > noisy_counts.max()

    def test_single_factor_shares_top_item(self):
        data = generate_synthetic(small_cfg(num_latent_factors=1, noise_rate=0.0, seed=2))
        counts = np.zeros(18)
        for _, item in data.interactions.pairs():
            counts[item] += 1
        # every region draws from the same preference profile whose strongest
        # items lead the catalog by construction
        assert set(np.argsort(counts)[-3:]) == {0, 1, 2}
        assert counts[:6].sum() > 3 * counts[12:].sum()

    def test_some_regions_have_no_history(self):
        data = generate_synthetic(small_cfg(interactions_per_region=2.0, seed=11))
        active = set(data.interactions.active_users())
        assert len(active) < 120
