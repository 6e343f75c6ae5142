"""Build the region-feature User Graph and prune it into its densified form.

Ingestion turns a region-feature table into triples: one region entity per
record, one ``region --relation--> value`` triple per non-missing value.
Discrete values are shared nodes per relation; continuous values start out as
per-value nodes and are merged by :func:`prune_graph`, which rewires each
continuous edge onto a shared discretized level node (``Area.GDP:L2`` style).
Regions whose continuous values fall in the same bin thereby gain length-2
paths between them, raising graph density.
"""

from __future__ import annotations

import csv
import math
import re
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

try:
    import tomllib as tomli
except ImportError:  # Python < 3.11
    import tomli

from .kg import EntityKind, GraphBuilder, GraphStats, KnowledgeGraph, graph_density

DISCRETE = "discrete"
CONTINUOUS = "continuous"

GEOGRAPHICAL_LOCATION = "Geographical Location"
RICHNESS_OF_RESOURCES = "Richness of Resources"
ECONOMIC_DEVELOPMENT = "Economic Development"
ENVIRONMENTAL_FRIENDLINESS = "Environmental Friendliness"
SOCIAL_DEVELOPMENT = "Social Development"
CULTURAL_FACTORS = "Cultural Factors"

LIST_SEPARATOR = "|"


class SchemaError(ValueError):
    """A record value does not conform to the feature schema."""


class IngestionError(ValueError):
    """Malformed ingestion input (duplicate regions, bad table layout)."""


class ConfigurationError(ValueError):
    """Invalid or incomplete binning configuration."""


@dataclass(frozen=True)
class FeatureSpec:
    feature: str
    relation: str
    kind: str  # DISCRETE or CONTINUOUS
    category: str
    multivalued: bool = False

    def __post_init__(self) -> None:
        if self.kind not in (DISCRETE, CONTINUOUS):
            raise SchemaError(f"unknown value kind: {self.kind!r}")
        if self.multivalued and self.kind != DISCRETE:
            raise SchemaError(f"{self.feature}: only discrete features may be multivalued")


@dataclass(frozen=True)
class FeatureSchema:
    entries: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        relations = [e.relation for e in self.entries]
        features = [e.feature for e in self.entries]
        if len(set(relations)) != len(relations):
            raise SchemaError("relation names must be unique")
        if len(set(features)) != len(features):
            raise SchemaError("feature names must be unique")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def by_feature(self, feature: str) -> FeatureSpec:
        for entry in self.entries:
            if entry.feature == feature:
                return entry
        raise SchemaError(f"unknown feature: {feature!r}")

    def continuous(self) -> tuple[FeatureSpec, ...]:
        return tuple(e for e in self.entries if e.kind == CONTINUOUS)

    def discrete(self) -> tuple[FeatureSpec, ...]:
        return tuple(e for e in self.entries if e.kind == DISCRETE)


def _spec(feature, relation, kind, category, multivalued=False):
    return FeatureSpec(feature, relation, kind, category, multivalued)


#: The bundled 29-indicator region schema: 8/4/5/5/3/4 across the six
#: categories, 20 continuous and 9 discrete entries.
DEFAULT_SCHEMA = FeatureSchema(
    (
        _spec("Province", "Area.Province", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("City", "Area.City", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("Division", "Area.Division", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("Precipitation", "Area.Precipitation", CONTINUOUS, GEOGRAPHICAL_LOCATION),
        _spec("Soil", "Area.Soil", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("Climate", "Area.Climate", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("Altitude", "Area.Altitude", CONTINUOUS, GEOGRAPHICAL_LOCATION),
        _spec("Landform", "Area.Landform", DISCRETE, GEOGRAPHICAL_LOCATION),
        _spec("Cultivated Area", "Area.CultivateArea", CONTINUOUS, RICHNESS_OF_RESOURCES),
        _spec("Grass Coverage", "Area.GrassCoverage", CONTINUOUS, RICHNESS_OF_RESOURCES),
        _spec("Per Capita Water Resources", "Area.WaterPer", CONTINUOUS, RICHNESS_OF_RESOURCES),
        _spec("Forest Coverage", "Area.WoodCover", CONTINUOUS, RICHNESS_OF_RESOURCES),
        _spec("Gross GDP", "Area.GDP", CONTINUOUS, ECONOMIC_DEVELOPMENT),
        _spec("GDP Per Capita", "Area.GDPPer", CONTINUOUS, ECONOMIC_DEVELOPMENT),
        _spec("Per Capita Savings of Urban Residents", "Area.UrbanSaving", CONTINUOUS, ECONOMIC_DEVELOPMENT),
        _spec("Proportion of Secondary Industry Output Value", "Area.SecondInGDP", CONTINUOUS, ECONOMIC_DEVELOPMENT),
        _spec("Proportion of Tertiary Industry Output Value", "Area.ThirdInGDP", CONTINUOUS, ECONOMIC_DEVELOPMENT),
        _spec("Environmental Quality of Surface Water", "Area.WaterQuality", CONTINUOUS, ENVIRONMENTAL_FRIENDLINESS),
        _spec("Soil Erosion Modulus", "Area.SoilErosion", CONTINUOUS, ENVIRONMENTAL_FRIENDLINESS),
        _spec("Number of Animal and Plant Habitats", "Area.BiologyHabitat", CONTINUOUS, ENVIRONMENTAL_FRIENDLINESS),
        _spec("Proportion of Nature Reserve Area", "Area.NatureReserve", CONTINUOUS, ENVIRONMENTAL_FRIENDLINESS),
        _spec("Comprehensive Risk of Natural Disasters", "Area.NatureRisk", CONTINUOUS, ENVIRONMENTAL_FRIENDLINESS),
        _spec("Highway and Railway Density", "Area.HighDensity", CONTINUOUS, SOCIAL_DEVELOPMENT),
        _spec("Number of Beds in Medical and Health Institutions", "Area.BedsInMedical", CONTINUOUS, SOCIAL_DEVELOPMENT),
        _spec("Number of Tourist Attractions above AAA", "Area.AAA", CONTINUOUS, SOCIAL_DEVELOPMENT),
        _spec("Nationality Group", "Area.Nationality", DISCRETE, CULTURAL_FACTORS, multivalued=True),
        _spec("Dialects", "Area.Dialect", DISCRETE, CULTURAL_FACTORS, multivalued=True),
        _spec("Number of Intangible Cultural Heritage", "Area.NOICH", CONTINUOUS, CULTURAL_FACTORS),
        _spec("Intangible Cultural Heritage Type List", "Area.ICHTL", DISCRETE, CULTURAL_FACTORS, multivalued=True),
    )
)


@dataclass(frozen=True)
class FeatureRecord:
    """One region row: feature-name -> value, missing entries omitted or None.

    Discrete values are strings (lists of strings for multivalued features);
    continuous values are finite reals.
    """

    region: str
    values: Mapping[str, object]


@dataclass(frozen=True)
class BinSpec:
    """Discretization rule for one continuous feature.

    Either carries explicit strictly-ascending ``edges`` (half-open intervals,
    the last unbounded: n edges define n+1 levels "L1".."L{n+1}") or an
    unresolved ``quantiles`` count to be computed from a value corpus.
    ``feature`` matches the relation name used in the triple store.
    """

    feature: str
    edges: tuple[float, ...] | None = None
    quantiles: int | None = None

    def __post_init__(self) -> None:
        if (self.edges is None) == (self.quantiles is None):
            raise ConfigurationError(f"{self.feature}: specify exactly one of edges/quantiles")
        if self.edges is not None:
            if len(self.edges) < 1:
                raise ConfigurationError(f"{self.feature}: at least one bin edge required")
            if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
                raise ConfigurationError(f"{self.feature}: edges must be strictly ascending")
            if any(not math.isfinite(e) for e in self.edges):
                raise ConfigurationError(f"{self.feature}: edges must be finite")
        if self.quantiles is not None and self.quantiles < 2:
            raise ConfigurationError(f"{self.feature}: quantile count must be >= 2")

    @property
    def resolved(self) -> bool:
        return self.edges is not None

    def labels(self) -> tuple[str, ...]:
        if self.edges is None:
            raise ConfigurationError(f"{self.feature}: bin spec not resolved")
        return tuple(f"L{k}" for k in range(1, len(self.edges) + 2))


def discretize(value: float, spec: BinSpec) -> str:
    """Map a finite value to its level label: L1 below the first edge, then one
    level per half-open interval [e_k, e_{k+1}), the last interval unbounded."""
    if not spec.resolved:
        raise ConfigurationError(f"{spec.feature}: bin spec not resolved")
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"cannot discretize non-finite value {value!r}")
    return f"L{bisect_right(spec.edges, value) + 1}"


def resolve_bin_specs(
    specs: Iterable[BinSpec], values_by_feature: Mapping[str, Sequence[float]]
) -> dict[str, BinSpec]:
    """Turn quantile rules into explicit edges using the given value corpus.

    Duplicate quantile edges (heavy ties) are collapsed; a feature whose corpus
    collapses to a single level is rejected.
    """
    resolved: dict[str, BinSpec] = {}
    for spec in specs:
        if spec.resolved:
            resolved[spec.feature] = spec
            continue
        values = values_by_feature.get(spec.feature)
        if values is None or len(values) == 0:
            raise ConfigurationError(f"{spec.feature}: no values to compute quantiles from")
        corpus = np.asarray(values, dtype=np.float64)
        if corpus.max() == corpus.min():
            raise ConfigurationError(
                f"{spec.feature}: constant values; specify explicit edges instead"
            )
        qs = [k / spec.quantiles for k in range(1, spec.quantiles)]
        edges = np.quantile(corpus, qs)
        unique = sorted(set(float(e) for e in edges))
        resolved[spec.feature] = BinSpec(spec.feature, edges=tuple(unique))
    return resolved


def quantile_specs(schema: FeatureSchema, n: int = 4) -> dict[str, BinSpec]:
    """Unresolved quantile(n) specs for every continuous feature, keyed by relation."""
    return {e.relation: BinSpec(e.relation, quantiles=n) for e in schema.continuous()}


def _value_node(relation: str, value: object) -> str:
    if isinstance(value, float):
        return f"{relation}={value!r}"
    return f"{relation}={value}"


def _check_continuous(feature: str, value: object) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{feature}: expected a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise SchemaError(f"{feature}: continuous value must be finite, got {value!r}")
    return value


def _discrete_values(entry: FeatureSpec, value: object) -> list[str]:
    if entry.multivalued:
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            raise SchemaError(f"{entry.feature}: expected a string or list of strings, got {value!r}")
        return [v for v in value if v]
    if not isinstance(value, str):
        raise SchemaError(f"{entry.feature}: expected a string, got {value!r}")
    return [value] if value else []


def build_user_graph(records: Sequence[FeatureRecord], schema: FeatureSchema) -> KnowledgeGraph:
    """Assemble the region-feature graph from validated records.

    All regions are registered first so their entity ids form the dense prefix
    0..len(records)-1, in record order.
    """
    builder = GraphBuilder()
    seen_regions: set[str] = set()
    for record in records:
        if record.region in seen_regions:
            raise IngestionError(f"duplicate region id: {record.region!r}")
        seen_regions.add(record.region)
        builder.add_entity(record.region, EntityKind.REGION)
        unknown = set(record.values) - {e.feature for e in schema}
        if unknown:
            raise SchemaError(f"{record.region}: values for unknown features {sorted(unknown)}")
    relation_ids = {e.relation: builder.add_relation(e.relation) for e in schema}
    for record in records:
        head = builder.add_entity(record.region, EntityKind.REGION)
        for entry in schema:
            value = record.values.get(entry.feature)
            if value is None:
                continue
            if entry.kind == CONTINUOUS:
                labels = [_value_node(entry.relation, _check_continuous(entry.feature, value))]
            else:
                labels = [_value_node(entry.relation, v) for v in _discrete_values(entry, value)]
            for name in labels:
                tail = builder.add_entity(name, EntityKind.FEATURE_VALUE)
                builder.add_triple(head, relation_ids[entry.relation], tail)
    return builder.freeze()


@dataclass(frozen=True)
class PruneReport:
    nodes_removed: int
    nodes_created: int
    stats_before: GraphStats
    stats_after: GraphStats


_VALUE_RE = re.compile(r"^(?P<relation>[^=]+)=(?P<value>.*)$")


def _parse_value_node(name: str) -> tuple[str, str]:
    match = _VALUE_RE.match(name)
    if match is None:
        raise ConfigurationError(f"feature-value node {name!r} lacks 'relation=value' form")
    return match.group("relation"), match.group("value")


def prune_graph(
    graph: KnowledgeGraph, specs: Mapping[str, BinSpec]
) -> tuple[KnowledgeGraph, PruneReport]:
    """Rewire continuous feature-value nodes onto shared discretized level nodes.

    ``specs`` maps relation names to resolved bin rules. Every feature-value
    tail under a listed relation is removed and its edge reattached to the
    level node ``"<relation>:<label>"`` (created on first use). Edges under
    unlisted relations and edges already pointing at level nodes are copied
    verbatim, which makes the pass idempotent. Relation and region
    vocabularies are preserved, including isolated regions.
    """
    for feature, spec in specs.items():
        if not spec.resolved:
            raise ConfigurationError(f"{feature}: bin spec not resolved; compute quantile edges first")
    builder = GraphBuilder()
    for entity in range(graph.num_entities):
        if graph.kinds[entity] == EntityKind.REGION:
            builder.add_entity(graph.entities.name_of(entity), EntityKind.REGION)
    for name in graph.relations:
        builder.add_relation(name)
    removed: set[int] = set()
    created: set[str] = set()
    for head, rel, tail in graph.triples:
        relation = graph.relations.name_of(rel)
        head_id = builder.add_entity(graph.entities.name_of(head), graph.kinds[head])
        spec = specs.get(relation)
        if spec is not None and graph.kinds[tail] == EntityKind.FEATURE_VALUE:
            _, raw = _parse_value_node(graph.entities.name_of(tail))
            label = discretize(float(raw), spec)
            node = f"{relation}:{label}"
            tail_id = builder.add_entity(node, EntityKind.LEVEL_NODE)
            removed.add(tail)
            created.add(node)
        else:
            tail_id = builder.add_entity(graph.entities.name_of(tail), graph.kinds[tail])
        builder.add_triple(head_id, rel, tail_id)
    pruned = builder.freeze()
    report = PruneReport(
        nodes_removed=len(removed),
        nodes_created=len(created),
        stats_before=graph_density(graph),
        stats_after=graph_density(pruned),
    )
    return pruned, report


def prune_user_graph(
    graph: KnowledgeGraph, schema: FeatureSchema, specs: Mapping[str, BinSpec]
) -> tuple[KnowledgeGraph, PruneReport]:
    """:func:`prune_graph` with a coverage check: every continuous schema
    feature must have a bin spec."""
    missing = [e.relation for e in schema.continuous() if e.relation not in specs]
    if missing:
        raise ConfigurationError(f"missing bin specs for continuous features: {missing}")
    return prune_graph(graph, specs)


def collect_feature_values(graph: KnowledgeGraph, relations: Iterable[str]) -> dict[str, list[float]]:
    """Per-relation multiset of continuous values parsed back from value nodes,
    one occurrence per edge (so quantiles weight by how often a value occurs)."""
    wanted = set(relations)
    values: dict[str, list[float]] = {name: [] for name in wanted}
    for _, rel, tail in graph.triples:
        relation = graph.relations.name_of(rel)
        if relation in wanted and graph.kinds[tail] == EntityKind.FEATURE_VALUE:
            _, raw = _parse_value_node(graph.entities.name_of(tail))
            values[relation].append(float(raw))
    return values


def read_feature_csv(path: str | Path, schema: FeatureSchema) -> list[FeatureRecord]:
    """Read the region-feature table: header = feature names, first column =
    region id, empty cells = missing, '|' separates list values."""
    records: list[FeatureRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty feature table") from None
        if len(header) < 2:
            raise IngestionError(f"{path}: expected a region-id column plus feature columns")
        features = header[1:]
        known = {e.feature for e in schema}
        unknown = set(features) - known
        if unknown:
            raise SchemaError(f"{path}: unknown feature columns {sorted(unknown)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            values: dict[str, object] = {}
            for feature, cell in zip(features, row[1:]):
                cell = cell.strip()
                if not cell:
                    continue
                entry = schema.by_feature(feature)
                if entry.kind == CONTINUOUS:
                    try:
                        values[feature] = float(cell)
                    except ValueError:
                        raise SchemaError(f"{path}:{lineno}: {feature}: not a number: {cell!r}") from None
                elif entry.multivalued:
                    values[feature] = [v.strip() for v in cell.split(LIST_SEPARATOR) if v.strip()]
                else:
                    values[feature] = cell
            records.append(FeatureRecord(region=row[0], values=values))
    return records


def write_feature_csv(path: str | Path, records: Sequence[FeatureRecord], schema: FeatureSchema) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region"] + [e.feature for e in schema])
        for record in records:
            row = [record.region]
            for entry in schema:
                value = record.values.get(entry.feature)
                if value is None:
                    row.append("")
                elif entry.kind == CONTINUOUS:
                    row.append(repr(float(value)))
                elif entry.multivalued and isinstance(value, (list, tuple)):
                    row.append(LIST_SEPARATOR.join(value))
                else:
                    row.append(str(value))
            writer.writerow(row)


def write_bin_specs(path: str | Path, specs: Mapping[str, BinSpec]) -> None:
    """Persist bin specs as a TOML table per feature; resolved specs keep their
    exact edges so inference re-uses training-time bins bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        for feature in sorted(specs):
            spec = specs[feature]
            fh.write(f'["{feature}"]\n')
            if spec.resolved:
                edges = ", ".join(repr(e) for e in spec.edges)
                fh.write(f"edges = [{edges}]\n\n")
            else:
                fh.write(f"quantile = {spec.quantiles}\n\n")


def read_bin_specs(path: str | Path) -> dict[str, BinSpec]:
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    specs: dict[str, BinSpec] = {}
    for feature, table in data.items():
        if not isinstance(table, dict):
            raise ConfigurationError(f"{path}: expected a table per feature, got {table!r}")
        if "edges" in table:
            specs[feature] = BinSpec(feature, edges=tuple(float(e) for e in table["edges"]))
        elif "quantile" in table:
            specs[feature] = BinSpec(feature, quantiles=int(table["quantile"]))
        else:
            raise ConfigurationError(f"{path}: {feature}: needs 'edges' or 'quantile'")
    return specs
