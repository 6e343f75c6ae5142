"""Pairwise-ranking trainer with hand-derived gradients.

Each training sample is (user, positive item, sampled negative item); the
objective is BPR, loss = softplus(-(y_pos - y_neg)), plus an L2 term on the
fused user representation and the two item embeddings. Gradients are
propagated analytically through scoring, fusion, the intent aggregation and
the multi-hop graph aggregation; :func:`grad_check` verifies them against
central finite differences.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._kernels import agg_backward, agg_forward
from .interactions import DataSplit, InteractionMatrix, sample_negative
from .kg import KnowledgeGraph
from .model import ModelParams, softmax

OPTIMIZERS = ("sgd", "adam")


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainConfig:
    dim: int = 64
    batch_size: int = 128
    num_intents: int = 4
    num_layers: int = 4
    learning_rate: float = 1e-3
    l2_coeff: float = 1e-5
    epochs: int = 50
    seed: int = 0
    include_self: bool = True
    use_fusion_attention: bool = True
    optimizer: str = "adam"

    def __post_init__(self) -> None:
        for name in ("dim", "batch_size", "num_intents", "num_layers", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0 or self.l2_coeff < 0:
            raise ValueError("learning_rate and l2_coeff must be non-negative")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "TrainConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    z = np.exp(x)
    return z / (1.0 + z)


def softplus(x: float) -> float:
    return max(x, 0.0) + np.log1p(np.exp(-abs(x)))


def bpr_loss(y_pos: float, y_neg: float) -> float:
    """Pairwise ranking loss -ln sigma(y_pos - y_neg), evaluated as a stable
    softplus of the negated margin."""
    return softplus(-(y_pos - y_neg))


def _zero_grads(params: ModelParams) -> dict[str, np.ndarray]:
    return {key: np.zeros_like(arr) for key, arr in params.arrays().items()}


def _forward_sample(
    params: ModelParams,
    layers: list[np.ndarray],
    p_emb: np.ndarray,
    user: int,
    pos: int,
    neg: int,
    history: Sequence[int],
    l2: float,
    include_self: bool,
    use_attention: bool,
):
    """Loss plus every intermediate the backward pass needs."""
    e_kg = np.zeros(params.dim)
    if include_self:
        e_kg = e_kg + layers[0][user]
    for state in layers[1:]:
        e_kg = e_kg + state[user]

    beta = z = mix = h_sum = None
    if history:
        z = p_emb @ params.entity_emb[user]
        beta = softmax(z)
        mix = beta @ p_emb
        h_sum = params.item_emb[list(history)].sum(axis=0)
        e_ig = (mix * h_sum) / (params.num_intents * len(history))
    else:
        e_ig = np.zeros(params.dim)

    if use_attention:
        logits = np.array([params.fusion_w @ e_kg, params.fusion_w @ e_ig])
        gamma = np.maximum(softmax(logits), 0.0)
        e_u = gamma[0] * e_kg + gamma[1] * e_ig
    else:
        gamma = None
        e_u = e_kg + e_ig

    q_pos = params.item_emb[pos]
    q_neg = params.item_emb[neg]
    y_pos = float(e_u @ q_pos)
    y_neg = float(e_u @ q_neg)
    margin = y_pos - y_neg
    loss = bpr_loss(y_pos, y_neg) + l2 * (e_u @ e_u + q_pos @ q_pos + q_neg @ q_neg)
    cache = (e_kg, e_ig, e_u, gamma, beta, mix, h_sum, margin, q_pos, q_neg)
    return float(loss), cache


def _batch_forward_backward(
    params: ModelParams,
    graph: KnowledgeGraph,
    users: Sequence[int],
    positives: Sequence[int],
    negatives: Sequence[int],
    histories: Sequence[Sequence[int]],
    l2: float,
    include_self: bool = True,
    use_attention: bool = True,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean loss over the batch and mean gradients for every parameter table."""
    batch = len(users)
    alpha = softmax(params.intent_weights, axis=0)
    p_emb = alpha.T @ params.relation_emb
    layers = [params.entity_emb]
    dst, rel, src, inv_deg = graph.adjacency_arrays()
    for _ in range(params.num_layers):
        layers.append(agg_forward(dst, rel, src, inv_deg, params.relation_emb, layers[-1]))

    grads = _zero_grads(params)
    g_entity = grads["entity_emb"]
    g_item = grads["item_emb"]
    g_p_emb = np.zeros_like(p_emb)
    kg_seeds = np.zeros_like(params.entity_emb)
    loss_sum = 0.0

    for user, pos, neg, history in zip(users, positives, negatives, histories):
        loss, cache = _forward_sample(
            params, layers, p_emb, user, pos, neg, history, l2, include_self, use_attention
        )
        e_kg, e_ig, e_u, gamma, beta, mix, h_sum, margin, q_pos, q_neg = cache
        loss_sum += loss

        d_margin = -sigmoid(-margin)
        g_item[pos] += d_margin * e_u + 2.0 * l2 * q_pos
        g_item[neg] += -d_margin * e_u + 2.0 * l2 * q_neg
        g_eu = d_margin * (q_pos - q_neg) + 2.0 * l2 * e_u

        if use_attention:
            d_gamma = np.array([g_eu @ e_kg, g_eu @ e_ig])
            pivot = gamma @ d_gamma
            d_logits = gamma * (d_gamma - pivot)
            grads["fusion_w"] += d_logits[0] * e_kg + d_logits[1] * e_ig
            g_kg = gamma[0] * g_eu + d_logits[0] * params.fusion_w
            g_ig = gamma[1] * g_eu + d_logits[1] * params.fusion_w
        else:
            g_kg = g_eu
            g_ig = g_eu

        if history:
            scale = 1.0 / (params.num_intents * len(history))
            g_mix = (g_ig * h_sum) * scale
            g_hist = (g_ig * mix) * scale
            for item in history:
                g_item[item] += g_hist
            g_beta = p_emb @ g_mix
            g_p_emb += beta[:, None] * g_mix[None, :]
            g_z = beta * (g_beta - beta @ g_beta)
            g_p_emb += g_z[:, None] * params.entity_emb[user][None, :]
            g_entity[user] += g_z @ p_emb

        kg_seeds[user] += g_kg
        if include_self:
            g_entity[user] += g_kg

    # Aggregation backward: e_kg sums the user row of every hop, so the same
    # seed matrix re-enters at each layer before being pushed one hop down.
    g_state = np.zeros_like(params.entity_emb)
    for level in range(params.num_layers, 0, -1):
        g_state += kg_seeds
        g_state, g_rel_layer = agg_backward(
            dst, rel, src, inv_deg, params.relation_emb, layers[level - 1], g_state
        )
        grads["relation_emb"] += g_rel_layer
    g_entity += g_state

    # Intent-embedding backward: e_p = sum_r alpha[r, p] * rel_emb[r].
    grads["relation_emb"] += alpha @ g_p_emb
    g_alpha = params.relation_emb @ g_p_emb.T
    col_dots = np.sum(alpha * g_alpha, axis=0)
    grads["intent_weights"] += alpha * (g_alpha - col_dots[None, :])

    for arr in grads.values():
        arr /= batch
    return loss_sum / batch, grads


class SgdOptimizer:
    def __init__(self, learning_rate: float) -> None:
        self.learning_rate = learning_rate

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for key, arr in arrays.items():
            arr -= self.learning_rate * grads[key]


class AdamOptimizer:
    def __init__(
        self,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t = 0

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self._t += 1
        correction1 = 1.0 - self.beta1**self._t
        correction2 = 1.0 - self.beta2**self._t
        for key, arr in arrays.items():
            grad = grads[key]
            m = self._m.setdefault(key, np.zeros_like(arr))
            v = self._v.setdefault(key, np.zeros_like(arr))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            arr -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "sgd":
        return SgdOptimizer(cfg.learning_rate)
    return AdamOptimizer(cfg.learning_rate)


class Trainer:
    """Owns the optimizer state across epochs; mutates ``params`` in place."""

    def __init__(self, params: ModelParams, graph: KnowledgeGraph, cfg: TrainConfig) -> None:
        if params.num_layers != cfg.num_layers:
            raise ValueError("params.num_layers disagrees with config")
        self.params = params
        self.graph = graph
        self.cfg = cfg
        self.optimizer = make_optimizer(cfg)

    def train_epoch(self, train: InteractionMatrix, rng: np.random.Generator) -> float:
        cfg = self.cfg
        positives = list(train.pairs())
        if not positives:
            return 0.0
        order = rng.permutation(len(positives))
        loss_total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start : start + cfg.batch_size]
            users = [positives[j][0] for j in chunk]
            pos = [positives[j][1] for j in chunk]
            neg = [sample_negative(train, u, rng) for u in users]
            histories = [train.items_of(u) for u in users]
            loss, grads = _batch_forward_backward(
                self.params, self.graph, users, pos, neg, histories,
                cfg.l2_coeff, cfg.include_self, cfg.use_fusion_attention,
            )
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss {loss!r}; aborting epoch")
            self.optimizer.step(self.params.arrays(), grads)
            loss_total += loss * len(chunk)
        return loss_total / len(positives)


def train_epoch(
    params: ModelParams,
    graph: KnowledgeGraph,
    train: InteractionMatrix,
    cfg: TrainConfig,
    rng: np.random.Generator,
    optimizer=None,
) -> tuple[ModelParams, float]:
    """Single-epoch entry point; pass ``optimizer`` to carry state across calls."""
    trainer = Trainer(params, graph, cfg)
    if optimizer is not None:
        trainer.optimizer = optimizer
    mean_loss = trainer.train_epoch(train, rng)
    return params, mean_loss


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    validation_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    wall_time: float = 0.0


def fit(
    graph: KnowledgeGraph,
    split: DataSplit,
    cfg: TrainConfig,
    log=None,
) -> tuple[ModelParams, TrainReport]:
    """Train from scratch; keeps the parameter snapshot with the best
    validation F1@3 (falls back to the final epoch when validation is empty)."""
    from .evaluation import validation_f1_at_3

    rng = np.random.default_rng(cfg.seed)
    params = ModelParams.initialize(
        graph.num_entities, graph.num_relations, split.train.num_items,
        cfg.dim, cfg.num_intents, cfg.num_layers, rng,
    )
    trainer = Trainer(params, graph, cfg)
    report = TrainReport()
    best: ModelParams | None = None
    best_f1 = -np.inf
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        loss = trainer.train_epoch(split.train, rng)
        f1 = validation_f1_at_3(
            params, graph, split,
            include_self=cfg.include_self, use_attention=cfg.use_fusion_attention,
        )
        report.epoch_losses.append(loss)
        report.validation_f1.append(f1)
        # An unevaluable validation split (NaN) keeps refreshing the snapshot,
        # so the final epoch wins.
        if np.isnan(f1) or f1 > best_f1:
            if not np.isnan(f1):
                best_f1 = f1
            best = params.copy()
            report.best_epoch = epoch
        if log is not None:
            log(f"epoch {epoch + 1}/{cfg.epochs}  loss {loss:.4f}  valid F1@3 {f1:.4f}")
    report.wall_time = time.perf_counter() - started
    assert best is not None
    return best, report


def grad_check(
    params: ModelParams,
    graph: KnowledgeGraph,
    sample: tuple[int, int, int],
    eps: float = 1e-5,
    train: InteractionMatrix | None = None,
    l2: float = 1e-5,
    include_self: bool = True,
    use_attention: bool = True,
) -> float:
    """Max relative disagreement between analytic and central-difference
    gradients over every parameter entry: max |a - n| / max(1, |n|)."""
    user, pos, neg = sample
    history = train.items_of(user) if train is not None else ()

    def objective() -> float:
        alpha = softmax(params.intent_weights, axis=0)
        p_emb = alpha.T @ params.relation_emb
        dst, rel, src, inv_deg = graph.adjacency_arrays()
        layers = [params.entity_emb]
        for _ in range(params.num_layers):
            layers.append(agg_forward(dst, rel, src, inv_deg, params.relation_emb, layers[-1]))
        loss, _ = _forward_sample(
            params, layers, p_emb, user, pos, neg, history, l2, include_self, use_attention
        )
        return loss

    _, analytic = _batch_forward_backward(
        params, graph, [user], [pos], [neg], [history], l2, include_self, use_attention
    )
    worst = 0.0
    for key, arr in params.arrays().items():
        flat = arr.reshape(-1)
        grad_flat = analytic[key].reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + eps
            upper = objective()
            flat[idx] = original - eps
            lower = objective()
            flat[idx] = original
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, abs(grad_flat[idx] - numeric) / max(1.0, abs(numeric)))
    return worst
