"""Command-line surface.

Subcommands: synth, ingest, prune, split, train, recommend, evaluate,
analyze intents, plan. Exit codes: 0 success, 1 usage error, 2 data or
format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, checkpoint, evaluation, ingest, interactions, kg, model, synth, training


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits 2 by default
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_schema(path: str | None) -> ingest.FeatureSchema:
    if path is None:
        return ingest.DEFAULT_SCHEMA
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = [
        ingest.FeatureSpec(
            feature=e["feature"],
            relation=e["relation"],
            kind=e["kind"],
            category=e.get("category", ""),
            multivalued=bool(e.get("multivalued", False)),
        )
        for e in data
    ]
    return ingest.FeatureSchema(tuple(entries))


def _region_vocab(graph: kg.KnowledgeGraph) -> kg.Vocab:
    regions = graph.region_ids()
    if regions != list(range(len(regions))):
        raise ValueError("region entities must form a dense id prefix; rebuild the graph")
    return kg.Vocab(graph.entities.name_of(i) for i in regions)


def _check_vocab(ckpt: checkpoint.Checkpoint, graph: kg.KnowledgeGraph) -> None:
    if ckpt.entity_names != graph.entities.names():
        raise ValueError("checkpoint entity vocabulary does not match the graph")
    if ckpt.relation_names != graph.relations.names():
        raise ValueError("checkpoint relation vocabulary does not match the graph")


def _history_matrix(
    path: str, users: kg.Vocab, items: kg.Vocab
) -> interactions.InteractionMatrix:
    pairs = interactions.read_interaction_pairs(path)
    return interactions.encode_interactions(pairs, users, items)


def cmd_synth(args) -> int:
    cfg = synth.SynthConfig(
        num_regions=args.regions,
        num_items=args.items,
        num_latent_factors=args.factors,
        interactions_per_region=args.interactions_mean,
        noise_rate=args.noise,
        seed=args.seed,
    )
    data = synth.generate_synthetic(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ingest.write_feature_csv(out / "features.csv", data.records, data.schema)
    users = kg.Vocab(data.region_names)
    items = kg.Vocab(data.item_names)
    interactions.write_interactions_tsv(out / "interactions.tsv", data.interactions, users, items)
    analysis.write_taxonomy_tsv(out / "taxonomy.tsv", data.taxonomy)
    print(
        f"wrote {cfg.num_regions} regions, {cfg.num_items} items, "
        f"{data.interactions.num_interactions} interactions to {out}"
    )
    return 0


def cmd_ingest(args) -> int:
    schema = _load_schema(args.schema)
    records = ingest.read_feature_csv(args.features, schema)
    graph = ingest.build_user_graph(records, schema)
    kg.write_triples_tsv(graph, args.out)
    stats = graph.stats()
    print(
        f"user graph: {stats.node_count} nodes, {stats.edge_count} edges, "
        f"density {stats.density:.4%}"
    )
    return 0


def cmd_prune(args) -> int:
    schema = _load_schema(args.schema)
    graph = kg.read_triples_tsv(args.triples)
    present = set(graph.relations)
    if args.bins:
        specs = ingest.read_bin_specs(args.bins)
    else:
        specs = ingest.quantile_specs(schema, args.quantiles)
    specs = {rel: spec for rel, spec in specs.items() if rel in present}
    unresolved = [spec for spec in specs.values() if not spec.resolved]
    if unresolved:
        corpus = ingest.collect_feature_values(graph, [s.feature for s in unresolved])
        specs.update(ingest.resolve_bin_specs(unresolved, corpus))
    missing = [
        e.relation for e in schema.continuous() if e.relation in present and e.relation not in specs
    ]
    if missing:
        raise ingest.ConfigurationError(f"missing bin specs for continuous features: {missing}")
    pruned, report = ingest.prune_graph(graph, specs)
    kg.write_triples_tsv(pruned, args.out)
    out_bins = args.out_bins or f"{args.out}.bins.toml"
    ingest.write_bin_specs(out_bins, specs)
    before, after = report.stats_before, report.stats_after
    print(f"before: {before.node_count} nodes, {before.edge_count} edges, density {before.density:.4%}")
    print(f"after:  {after.node_count} nodes, {after.edge_count} edges, density {after.density:.4%}")
    print(f"removed {report.nodes_removed} value nodes, created {report.nodes_created} level nodes")
    print(f"bin spec written to {out_bins}")
    return 0


def cmd_split(args) -> int:
    pairs = interactions.read_interaction_pairs(args.interactions)
    users = kg.Vocab(user for user, _ in pairs)
    items = interactions.item_vocab_from_pairs([pairs])
    matrix = interactions.encode_interactions(pairs, users, items)
    split = interactions.split_interactions(matrix, args.seed)
    interactions.write_split(args.out, split, users, items)
    print(
        f"split {matrix.num_interactions} interactions: "
        f"{split.train.num_interactions} train / "
        f"{split.validation.num_interactions} validation / "
        f"{split.test.num_interactions} test (seed {split.seed})"
    )
    return 0


def _train_overrides(args) -> dict:
    overrides = {
        "dim": args.dim,
        "batch_size": args.batch_size,
        "num_intents": args.intents,
        "num_layers": args.layers,
        "learning_rate": args.lr,
        "l2_coeff": args.l2,
        "epochs": args.epochs,
        "seed": args.seed,
        "optimizer": args.optimizer,
    }
    if args.no_include_self:
        overrides["include_self"] = False
    if args.no_fusion_attention:
        overrides["use_fusion_attention"] = False
    return {k: v for k, v in overrides.items() if v is not None}


def cmd_train(args) -> int:
    graph = kg.read_triples_tsv(args.triples)
    users = _region_vocab(graph)
    pair_lists = [
        interactions.read_interaction_pairs(Path(args.split) / f"{name}.tsv")
        for name in ("train", "validation", "test")
    ]
    items = interactions.item_vocab_from_pairs(pair_lists)
    split = interactions.read_split(args.split, users, items)
    overrides = _train_overrides(args)
    if args.config:
        cfg = training.TrainConfig.from_file(args.config, **overrides)
    else:
        cfg = training.TrainConfig(**overrides)
    bins = ingest.read_bin_specs(args.bins) if args.bins else {}
    params, report = training.fit(graph, split, cfg, log=print)
    ckpt = checkpoint.Checkpoint(
        params=params,
        entity_names=graph.entities.names(),
        relation_names=graph.relations.names(),
        item_names=items.names(),
        bins=bins,
    )
    checkpoint.save_checkpoint(ckpt, args.out)
    training.TrainConfig(**{**cfg.__dict__}).write(f"{args.out}.config.json")
    best_f1 = report.validation_f1[report.best_epoch]
    print(f"best epoch {report.best_epoch + 1} (valid F1@3 {best_f1:.4f}); checkpoint: {args.out}")
    return 0


def cmd_recommend(args) -> int:
    ckpt = checkpoint.load_checkpoint(args.ckpt)
    graph = kg.read_triples_tsv(args.triples)
    _check_vocab(ckpt, graph)
    users = _region_vocab(graph)
    items = kg.Vocab(ckpt.item_names)
    history = _history_matrix(args.interactions, users, items)
    user = users.id_of(args.region)
    ranked = model.recommend_topk(
        ckpt.params, graph, history, user, args.k,
        include_self=not args.no_include_self,
        use_attention=not args.no_fusion_attention,
    )
    for rank, (item, value) in enumerate(ranked, start=1):
        print(f"{rank}\t{items.name_of(item)}\t{value:.6f}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = checkpoint.load_checkpoint(args.ckpt)
    graph = kg.read_triples_tsv(args.triples)
    _check_vocab(ckpt, graph)
    users = _region_vocab(graph)
    items = kg.Vocab(ckpt.item_names)
    split = interactions.read_split(args.split, users, items)
    ks = [int(k) for k in args.k.split(",") if k]
    report = evaluation.evaluate_all(
        ckpt.params, graph, split, ks=ks, part=args.part,
        include_self=not args.no_include_self,
        use_attention=not args.no_fusion_attention,
    )
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


def cmd_analyze_intents(args) -> int:
    ckpt = checkpoint.load_checkpoint(args.ckpt)
    rows = analysis.top_relations_per_intent(ckpt.params, ckpt.relation_names, args.top)
    for p, names in enumerate(rows, start=1):
        print(f"p{p}\t" + "\t".join(names))
    return 0


def cmd_plan(args) -> int:
    ckpt = checkpoint.load_checkpoint(args.ckpt)
    graph = kg.read_triples_tsv(args.triples)
    _check_vocab(ckpt, graph)
    users = _region_vocab(graph)
    items = kg.Vocab(ckpt.item_names)
    history = _history_matrix(args.interactions, users, items)
    taxonomy = analysis.read_taxonomy_tsv(args.taxonomy)
    taxonomy.validate_catalog(ckpt.item_names)
    gov = analysis.read_region_patterns_tsv(args.gov) if args.gov else None
    if gov:
        unknown = [region for region in gov if region not in users]
        if unknown:
            raise ValueError(f"government plan lists unknown regions: {unknown[:10]}")
    layers = model.propagate(ckpt.params, graph)
    recommended: dict[str, list[str]] = {}
    history_names: dict[str, set[str]] = {}
    for user in range(len(users)):
        name = users.name_of(user)
        ranked = model.recommend_topk(
            ckpt.params, graph, history, user, args.k, layers=layers,
            include_self=not args.no_include_self,
            use_attention=not args.no_fusion_attention,
        )
        recommended[name] = [items.name_of(item) for item, _ in ranked]
        history_names[name] = {items.name_of(i) for i in history.items_of(user)}
    report = analysis.build_plan_report(recommended, history_names, taxonomy, gov, k=args.k)
    print(report.to_text())
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        print(f"report written to {args.out}")
    return 0


def _add_model_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--no-include-self", action="store_true", help="drop the layer-0 self embedding")
    sub.add_argument("--no-fusion-attention", action="store_true", help="fuse sources by plain sum")


def build_parser() -> _Parser:
    parser = _Parser(prog="ugpig", description=__doc__)
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = subs.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--regions", type=int, default=2596)
    p.add_argument("--items", type=int, default=94)
    p.add_argument("--factors", type=int, default=4)
    p.add_argument("--interactions-mean", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("ingest", help="build the user graph from a feature table")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", help="JSON schema file (default: bundled 29-feature schema)")
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("prune", help="discretize continuous feature nodes")
    p.add_argument("--triples", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", help="bin spec file (default: quantile bins per continuous feature)")
    p.add_argument("--quantiles", type=int, default=4)
    p.add_argument("--out-bins", help="where to write resolved bins (default: <out>.bins.toml)")
    p.add_argument("--schema", help="JSON schema file")
    p.set_defaults(func=cmd_prune)

    p = subs.add_parser("split", help="train/validation/test split")
    p.add_argument("--interactions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = subs.add_parser("train", help="train a model")
    p.add_argument("--triples", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", help="resolved bin spec file to embed in the checkpoint")
    p.add_argument("--config", help="JSON train config (flags override it)")
    p.add_argument("--dim", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--intents", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--l2", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--optimizer", choices=training.OPTIMIZERS)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("recommend", help="top-k patterns for one region")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--interactions", required=True, help="history TSV (excluded from candidates)")
    p.add_argument("--region", required=True)
    p.add_argument("--k", type=int, default=3)
    _add_model_flags(p)
    p.set_defaults(func=cmd_recommend)

    p = subs.add_parser("evaluate", help="ranking metrics on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--k", default="3,5")
    p.add_argument("--part", choices=("test", "validation"), default="test")
    p.add_argument("--out", help="also write the report as JSON")
    _add_model_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("analyze", help="model interpretation")
    analyze_subs = p.add_subparsers(dest="analyze_command", parser_class=_Parser)
    pi = analyze_subs.add_parser("intents", help="top relations per intent")
    pi.add_argument("--ckpt", required=True)
    pi.add_argument("--top", type=int, default=5)
    pi.set_defaults(func=cmd_analyze_intents)

    p = subs.add_parser("plan", help="development-direction report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--triples", required=True)
    p.add_argument("--interactions", required=True, help="full history TSV")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--gov", help="government plan TSV for accuracy")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", help="also write the report as JSON")
    _add_model_flags(p)
    p.set_defaults(func=cmd_plan)

    return parser


def run_cli(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args) or 0
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
