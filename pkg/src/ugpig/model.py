"""Forward model: intent embeddings, multi-hop graph aggregation, fusion, scoring.

A region's representation is fused from two sources:

* a graph side, aggregated over the pruned region-feature graph with the
  recursion s_x^(0) = e_x, s_x^(l) = 1/|N_x| * sum_{(r,v) in N_x} e_r * s_v^(l-1)
  (elementwise product), summed over layers together with the region's own
  embedding;
* an intent side, mixing the region's historical item embeddings with shared
  intent vectors, where each intent is a softmax-weighted combination of the
  relation embeddings and its per-region importance is a softmax over
  intent-region dot products.

The two sides are combined by a scalar attention over a shared projection
vector, and item scores are plain inner products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import agg_forward
from .interactions import InteractionMatrix
from .kg import KnowledgeGraph, VocabularyError


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax (max-subtraction)."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


@dataclass
class ModelParams:
    """All trainable tensors, float64 in memory.

    ``entity_emb`` rows cover every graph node (regions first), ``item_emb``
    rows cover the pattern catalog, ``intent_weights[r, p]`` is the logit of
    relation r under intent p, and ``fusion_w`` produces the scalar source
    logits for feature fusion.
    """

    entity_emb: np.ndarray
    relation_emb: np.ndarray
    item_emb: np.ndarray
    intent_weights: np.ndarray
    fusion_w: np.ndarray
    num_layers: int

    @property
    def dim(self) -> int:
        return self.entity_emb.shape[1]

    @property
    def num_intents(self) -> int:
        return self.intent_weights.shape[1]

    @property
    def num_entities(self) -> int:
        return self.entity_emb.shape[0]

    @property
    def num_relations(self) -> int:
        return self.relation_emb.shape[0]

    @property
    def num_items(self) -> int:
        return self.item_emb.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "entity_emb": self.entity_emb,
            "relation_emb": self.relation_emb,
            "item_emb": self.item_emb,
            "intent_weights": self.intent_weights,
            "fusion_w": self.fusion_w,
        }

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.entity_emb.copy(),
            self.relation_emb.copy(),
            self.item_emb.copy(),
            self.intent_weights.copy(),
            self.fusion_w.copy(),
            self.num_layers,
        )

    @classmethod
    def initialize(
        cls,
        num_entities: int,
        num_relations: int,
        num_items: int,
        dim: int,
        num_intents: int,
        num_layers: int,
        rng: np.random.Generator,
    ) -> "ModelParams":
        """Embedding tables uniform in (-1/sqrt(d), 1/sqrt(d)); intent weights
        and the fusion vector start at zero so every attention begins uniform.

        Values are drawn at float32 precision (then widened) so that a fresh
        model survives the float32 checkpoint round trip bit-exactly.
        """
        bound = 1.0 / np.sqrt(dim)

        def table(rows: int) -> np.ndarray:
            raw = rng.uniform(-bound, bound, size=(rows, dim))
            return raw.astype(np.float32).astype(np.float64)

        return cls(
            entity_emb=table(num_entities),
            relation_emb=table(num_relations),
            item_emb=table(num_items),
            intent_weights=np.zeros((num_relations, num_intents)),
            fusion_w=np.zeros(dim),
            num_layers=num_layers,
        )


@dataclass(frozen=True)
class UserRepresentation:
    e_kg: np.ndarray
    e_ig: np.ndarray
    fused: np.ndarray


def intent_attention(params: ModelParams) -> np.ndarray:
    """Relation attention per intent: column p is softmax_r(intent_weights[:, p])."""
    return softmax(params.intent_weights, axis=0)


def intent_embeddings(params: ModelParams) -> np.ndarray:
    """(num_intents, dim) matrix; intent p is its attention-weighted relation mix."""
    return intent_attention(params).T @ params.relation_emb


def propagate(params: ModelParams, graph: KnowledgeGraph, num_layers: int | None = None) -> list[np.ndarray]:
    """Layer states [s^0, ..., s^L] for every node; s^0 is the entity table."""
    if num_layers is None:
        num_layers = params.num_layers
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    dst, rel, src, inv_deg = graph.adjacency_arrays()
    layers = [params.entity_emb]
    for _ in range(num_layers):
        layers.append(agg_forward(dst, rel, src, inv_deg, params.relation_emb, layers[-1]))
    return layers


def aggregate_ugp(
    params: ModelParams,
    graph: KnowledgeGraph,
    user: int,
    num_layers: int | None = None,
    include_self: bool = True,
    layers: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Graph-side representation: self embedding plus hop sums at the user row.

    Isolated nodes contribute zero beyond (optionally) their own embedding.
    Pass precomputed ``layers`` to amortize propagation over many users.
    """
    if not 0 <= user < params.num_entities:
        raise VocabularyError(f"entity id out of range: {user}")
    if layers is None:
        layers = propagate(params, graph, num_layers)
    total = np.zeros(params.dim)
    if include_self:
        total += layers[0][user]
    for state in layers[1:]:
        total += state[user]
    return total


def intent_importance(params: ModelParams, user: int) -> np.ndarray:
    """Per-intent weights for a region: softmax_p(e_p . e_u) over the base
    entity row."""
    if not 0 <= user < params.num_entities:
        raise VocabularyError(f"entity id out of range: {user}")
    logits = intent_embeddings(params) @ params.entity_emb[user]
    return softmax(logits)


def aggregate_ig(params: ModelParams, train: InteractionMatrix, user: int) -> np.ndarray:
    """Intent-side representation averaged over (intent, history item) pairs.

    The sum factorizes: 1/(|P|*|H|) * (sum_p beta_p e_p) * (sum_{i in H} e_i)
    elementwise. Empty history yields the zero vector.
    """
    items = train.items_of(user)
    if not items:
        return np.zeros(params.dim)
    beta = intent_importance(params, user)
    mix = beta @ intent_embeddings(params)
    history_sum = params.item_emb[list(items)].sum(axis=0)
    return (mix * history_sum) / (params.num_intents * len(items))


def fusion_weights(params: ModelParams, e_kg: np.ndarray, e_ig: np.ndarray) -> np.ndarray:
    """(gamma_kg, gamma_ig): softmax over the two scalar source logits w . e,
    clamped at zero."""
    logits = np.array([params.fusion_w @ e_kg, params.fusion_w @ e_ig])
    return np.maximum(softmax(logits), 0.0)


def fuse(
    params: ModelParams, e_kg: np.ndarray, e_ig: np.ndarray, use_attention: bool = True
) -> np.ndarray:
    """Final region representation; with attention disabled, a plain sum."""
    if not use_attention:
        return e_kg + e_ig
    gamma = fusion_weights(params, e_kg, e_ig)
    return gamma[0] * e_kg + gamma[1] * e_ig


def user_representation(
    params: ModelParams,
    graph: KnowledgeGraph,
    train: InteractionMatrix,
    user: int,
    num_layers: int | None = None,
    include_self: bool = True,
    use_attention: bool = True,
    layers: list[np.ndarray] | None = None,
) -> UserRepresentation:
    e_kg = aggregate_ugp(params, graph, user, num_layers, include_self, layers)
    e_ig = aggregate_ig(params, train, user)
    return UserRepresentation(e_kg=e_kg, e_ig=e_ig, fused=fuse(params, e_kg, e_ig, use_attention))


def score(params: ModelParams, e_u: np.ndarray, item: int) -> float:
    if not 0 <= item < params.num_items:
        raise VocabularyError(f"item id out of range: {item}")
    return float(e_u @ params.item_emb[item])


def rank_candidates(
    e_u: np.ndarray, item_emb: np.ndarray, candidates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Candidates ordered by descending score, ties by ascending item index."""
    scores = item_emb[candidates] @ e_u
    order = np.lexsort((candidates, -scores))
    return candidates[order], scores[order]


def recommend_topk(
    params: ModelParams,
    graph: KnowledgeGraph,
    train: InteractionMatrix,
    user: int,
    k: int,
    include_self: bool = True,
    use_attention: bool = True,
    layers: list[np.ndarray] | None = None,
) -> list[tuple[int, float]]:
    """Top-k (item, score) pairs over every item outside the user's training
    history."""
    if k < 1:
        raise ValueError("k must be >= 1")
    seen = set(train.items_of(user))
    candidates = np.array([i for i in range(params.num_items) if i not in seen], dtype=np.int64)
    if candidates.size == 0:
        return []
    rep = user_representation(
        params, graph, train, user,
        include_self=include_self, use_attention=use_attention, layers=layers,
    )
    ranked, scores = rank_candidates(rep.fused, params.item_emb, candidates)
    top = min(k, ranked.size)
    return [(int(ranked[j]), float(scores[j])) for j in range(top)]
