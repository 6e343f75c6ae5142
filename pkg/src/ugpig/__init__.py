"""Knowledge-graph recommender for regional development patterns.

Pipeline: ingest a region-feature table into a triple store, prune continuous
feature nodes into shared level nodes, learn intent-weighted embeddings with
multi-hop graph aggregation and attention fusion, then rank catalog items per
region and derive planning reports.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .analysis import (
    Direction,
    PatternTaxonomy,
    classify_direction,
    coincidence_degree,
    planning_accuracy,
    top_relations_per_intent,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .evaluation import EvalReport, MetricsAtK, evaluate_all, metrics_at_k
from .ingest import (
    DEFAULT_SCHEMA,
    BinSpec,
    FeatureRecord,
    FeatureSchema,
    FeatureSpec,
    PruneReport,
    build_user_graph,
    discretize,
    prune_graph,
)
from .interactions import (
    DataSplit,
    InteractionMatrix,
    sample_negative,
    split_interactions,
)
from .kg import (
    EntityKind,
    GraphBuilder,
    GraphStats,
    KnowledgeGraph,
    Vocab,
    graph_density,
)
from .model import (
    ModelParams,
    UserRepresentation,
    aggregate_ig,
    aggregate_ugp,
    fuse,
    intent_embeddings,
    intent_importance,
    recommend_topk,
    score,
)
from .synth import SynthConfig, SynthDataset, generate_synthetic
from .training import TrainConfig, Trainer, TrainReport, bpr_loss, fit, grad_check, train_epoch

__version__ = "0.1.0"
