"""Post-hoc interpretability and planning tooling.

Covers the intent-relation weight tables, the coincidence degree between a
region's historical pattern categories and its recommended ones, the four-way
development-direction classification derived from it, and the aggregate
accuracy of Top-5 recommendations against government plans.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import AbstractSet, Mapping, Sequence

import numpy as np

from .model import ModelParams, intent_attention

SECOND_LEVEL_CATEGORIES = (
    "Nature Conservation",
    "Ecological Restoration and Governance",
    "Ecological Agriculture",
    "New Urbanization",
    "Ecological Industrial",
    "Green Consumption",
)


class Direction(Enum):
    CLEARLY_ORIENTED = "Clearly Oriented"
    UNHURRIEDLY_ADJUSTABLE = "Unhurriedly Adjustable"
    EXPECTANTLY_TRANSITIONAL = "Expectantly Transitional"
    URGENTLY_TRANSITIONAL = "Urgently Transitional"


class PatternTaxonomy:
    """Total mapping from pattern id to one of the six second-level categories."""

    def __init__(self, mapping: Mapping[str, str]) -> None:
        bad = {c for c in mapping.values() if c not in SECOND_LEVEL_CATEGORIES}
        if bad:
            raise ValueError(f"unknown second-level categories: {sorted(bad)}")
        self._mapping = dict(mapping)

    def category_of(self, pattern: str) -> str:
        try:
            return self._mapping[pattern]
        except KeyError:
            raise KeyError(f"pattern {pattern!r} missing from taxonomy") from None

    def categories_of(self, patterns: AbstractSet[str] | Sequence[str]) -> set[str]:
        return {self.category_of(p) for p in patterns}

    def validate_catalog(self, patterns: Sequence[str]) -> None:
        missing = [p for p in patterns if p not in self._mapping]
        if missing:
            raise ValueError(f"taxonomy does not cover patterns: {missing[:10]}")

    def __len__(self) -> int:
        return len(self._mapping)


def top_relations_per_intent(
    params: ModelParams, relation_names: Sequence[str], k: int
) -> list[list[str]]:
    """Per intent, the k relation names with the largest attention weight,
    ties broken by ascending relation index."""
    if k > len(relation_names):
        raise ValueError(f"k={k} exceeds relation count {len(relation_names)}")
    alpha = intent_attention(params)
    rows: list[list[str]] = []
    indices = np.arange(alpha.shape[0])
    for p in range(alpha.shape[1]):
        order = np.lexsort((indices, -alpha[:, p]))
        rows.append([relation_names[i] for i in order[:k]])
    return rows


def coincidence_degree(past: AbstractSet[str], recommended: AbstractSet[str]) -> float:
    """|past ∩ recommended| / |past| over second-level category sets."""
    if not past:
        raise ValueError("past category set must be non-empty (region has no history)")
    return len(set(past) & set(recommended)) / len(past)


def classify_direction(cd: float) -> Direction:
    """Four-way planning label: 1 -> Clearly Oriented, above one half ->
    Unhurriedly Adjustable, positive up to one half -> Expectantly
    Transitional, 0 -> Urgently Transitional."""
    if not 0.0 <= cd <= 1.0:
        raise ValueError(f"coincidence degree out of range: {cd!r}")
    if cd == 1.0:
        return Direction.CLEARLY_ORIENTED
    if cd > 0.5:
        return Direction.UNHURRIEDLY_ADJUSTABLE
    if cd > 0.0:
        return Direction.EXPECTANTLY_TRANSITIONAL
    return Direction.URGENTLY_TRANSITIONAL


def planning_accuracy(
    topk: Mapping[str, AbstractSet[str]],
    gov: Mapping[str, AbstractSet[str]],
    k: int = 5,
) -> float:
    """Overlap of per-region Top-k recommendations with government plan sets,
    normalized by k per region: sum_d |Top(d) ∩ Gov(d)| / (k * |D|)."""
    if set(topk) != set(gov):
        raise ValueError("topk and gov must cover the same regions")
    if not topk:
        raise ValueError("no regions to score")
    oversize = [d for d, items in topk.items() if len(items) > k]
    if oversize:
        raise ValueError(f"regions with more than {k} recommendations: {oversize[:10]}")
    overlap = sum(len(set(topk[d]) & set(gov[d])) for d in topk)
    return overlap / (k * len(topk))


@dataclass(frozen=True)
class RegionPlan:
    region: str
    coincidence: float | None  # None when the region has no history
    direction: Direction | None
    recommended: tuple[str, ...]


@dataclass(frozen=True)
class PlanReport:
    rows: tuple[RegionPlan, ...]
    accuracy: float | None  # None when no government plans were supplied

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "regions": [
                {
                    "region": r.region,
                    "coincidence": r.coincidence,
                    "direction": r.direction.value if r.direction else None,
                    "recommended": list(r.recommended),
                }
                for r in self.rows
            ],
        }

    def to_text(self) -> str:
        width = max([len(r.region) for r in self.rows] + [6])
        lines = [f"{'region':<{width}}  {'coincidence':>11}  direction"]
        for r in self.rows:
            if r.coincidence is None:
                lines.append(f"{r.region:<{width}}  {'--':>11}  (no history)")
            else:
                lines.append(
                    f"{r.region:<{width}}  {r.coincidence:>10.2%}  {r.direction.value}"
                )
        if self.accuracy is not None:
            lines.append(f"top-k planning accuracy: {self.accuracy:.2%}")
        return "\n".join(lines)


def build_plan_report(
    recommended: Mapping[str, Sequence[str]],
    history: Mapping[str, AbstractSet[str]],
    taxonomy: PatternTaxonomy,
    gov: Mapping[str, AbstractSet[str]] | None = None,
    k: int = 5,
) -> PlanReport:
    """Per-region coincidence/direction rows plus optional plan accuracy.

    ``recommended`` holds per-region Top-k pattern ids, ``history`` the
    region's full historical pattern ids; regions with empty history get a
    row without a direction.
    """
    rows = []
    for region in recommended:
        recs = tuple(recommended[region])
        past = history.get(region, set())
        if past:
            cd = coincidence_degree(taxonomy.categories_of(past), taxonomy.categories_of(recs))
            rows.append(RegionPlan(region, cd, classify_direction(cd), recs))
        else:
            rows.append(RegionPlan(region, None, None, recs))
    accuracy = None
    if gov is not None:
        accuracy = planning_accuracy(
            {region: set(recommended[region]) for region in gov}, gov, k=k
        )
    return PlanReport(rows=tuple(rows), accuracy=accuracy)


def read_taxonomy_tsv(path: str | Path) -> PatternTaxonomy:
    """TSV ``pattern_id<TAB>second_level_category``; ``#`` comments ignored."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated fields")
            mapping[parts[0]] = parts[1]
    return PatternTaxonomy(mapping)


def write_taxonomy_tsv(path: str | Path, taxonomy: PatternTaxonomy) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pattern in sorted(taxonomy._mapping):
            fh.write(f"{pattern}\t{taxonomy._mapping[pattern]}\n")


def read_region_patterns_tsv(path: str | Path) -> dict[str, set[str]]:
    """TSV ``region_id<TAB>pattern_id`` (one row per pattern) into per-region sets."""
    sets: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated fields")
            sets.setdefault(parts[0], set()).add(parts[1])
    return sets
