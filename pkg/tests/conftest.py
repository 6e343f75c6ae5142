import numpy as np
import pytest

from ugpig import kg


def random_graph(rng, num_nodes=20, num_relations=3, num_edges=30, region_prefix=None):
    """Random simple graph; heads drawn from the region prefix when given."""
    if region_prefix is None:
        region_prefix = num_nodes // 2
    builder = kg.GraphBuilder()
    for i in range(num_nodes):
        kind = kg.EntityKind.REGION if i < region_prefix else kg.EntityKind.FEATURE_VALUE
        builder.add_entity(f"e{i}", kind)
    for r in range(num_relations):
        builder.add_relation(f"rel{r}")
    placed = 0
    attempts = 0
    while placed < num_edges and attempts < 50 * num_edges:
        attempts += 1
        head = int(rng.integers(num_nodes))
        tail = int(rng.integers(num_nodes))
        if head == tail:
            continue
        before = len(builder._triples)
        builder.add_triple(head, int(rng.integers(num_relations)), tail)
        placed += len(builder._triples) - before
    return builder.freeze()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
