"""All-ranking Top-K evaluation: Precision@K, Recall@K, F1@K macro-averaged.

Every item outside a user's training history is ranked; users without truth
interactions in the evaluated part are excluded from the averages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, Sequence

import numpy as np

from .interactions import DataSplit, InteractionMatrix
from .kg import KnowledgeGraph
from .model import ModelParams, propagate, rank_candidates, user_representation


class EvaluationError(RuntimeError):
    """No user has truth interactions in the evaluated part."""


@dataclass(frozen=True)
class MetricsAtK:
    k: int
    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean with the 0/0 -> 0 convention."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics_at_k(recommended: Sequence[int], truth: AbstractSet[int], k: int) -> MetricsAtK:
    """Per-user metrics: precision divides by k (not by how many items were
    actually recommendable), recall by the truth size."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(recommended) > k:
        raise ValueError(f"got {len(recommended)} recommendations for k={k}")
    if not truth:
        raise ValueError("truth set must be non-empty; exclude the user instead")
    hits = len(set(recommended) & set(truth))
    precision = hits / k
    recall = hits / len(truth)
    return MetricsAtK(k=k, precision=precision, recall=recall, f1=f1_score(precision, recall))


@dataclass(frozen=True)
class EvalReport:
    metrics: tuple[MetricsAtK, ...]
    users_evaluated: int

    def at(self, k: int) -> MetricsAtK:
        for m in self.metrics:
            if m.k == k:
                return m
        raise KeyError(f"no metrics for k={k}")

    def to_dict(self) -> dict:
        return {
            "users_evaluated": self.users_evaluated,
            "metrics": [
                {"k": m.k, "precision": m.precision, "recall": m.recall, "f1": m.f1}
                for m in self.metrics
            ],
        }

    def to_text(self) -> str:
        lines = [f"{'K':>4}  {'Precision@K':>12}  {'Recall@K':>12}  {'F1@K':>12}"]
        for m in self.metrics:
            lines.append(f"{m.k:>4}  {m.precision:>12.4f}  {m.recall:>12.4f}  {m.f1:>12.4f}")
        lines.append(f"users evaluated: {self.users_evaluated}")
        return "\n".join(lines)


def evaluate_all(
    params: ModelParams,
    graph: KnowledgeGraph,
    split: DataSplit,
    ks: Sequence[int] = (3, 5),
    part: str = "test",
    include_self: bool = True,
    use_attention: bool = True,
) -> EvalReport:
    """Macro-averaged metrics over every user with truth in ``part``.

    The candidate pool per user is every item outside the user's training
    history (validation items stay rankable during test evaluation). Layer
    propagation is shared across users; per-user sums use compensated
    summation so the averages are order-independent.
    """
    if part not in ("test", "validation"):
        raise ValueError(f"unknown split part: {part!r}")
    truth_matrix: InteractionMatrix = getattr(split, "test" if part == "test" else "validation")
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError("ks must be positive")
    layers = propagate(params, graph)
    per_k: dict[int, list[tuple[float, float, float]]] = {k: [] for k in ks}
    users = 0
    for user in truth_matrix.active_users():
        truth = set(truth_matrix.items_of(user))
        seen = set(split.train.items_of(user))
        candidates = np.array(
            [i for i in range(params.num_items) if i not in seen], dtype=np.int64
        )
        if candidates.size == 0:
            continue
        rep = user_representation(
            params, graph, split.train, user,
            include_self=include_self, use_attention=use_attention, layers=layers,
        )
        ranked, _ = rank_candidates(rep.fused, params.item_emb, candidates)
        users += 1
        for k in ks:
            m = metrics_at_k(ranked[: min(k, ranked.size)].tolist(), truth, k)
            per_k[k].append((m.precision, m.recall, m.f1))
    if users == 0:
        raise EvaluationError(f"no evaluable users in the {part} part")
    metrics = tuple(
        MetricsAtK(
            k=k,
            precision=math.fsum(row[0] for row in per_k[k]) / users,
            recall=math.fsum(row[1] for row in per_k[k]) / users,
            f1=math.fsum(row[2] for row in per_k[k]) / users,
        )
        for k in ks
    )
    return EvalReport(metrics=metrics, users_evaluated=users)


def validation_f1_at_3(
    params: ModelParams,
    graph: KnowledgeGraph,
    split: DataSplit,
    include_self: bool = True,
    use_attention: bool = True,
) -> float:
    """Model-selection metric; NaN when the validation part has no evaluable user."""
    try:
        report = evaluate_all(
            params, graph, split, ks=(3,), part="validation",
            include_self=include_self, use_attention=use_attention,
        )
    except EvaluationError:
        return float("nan")
    return report.at(3).f1
