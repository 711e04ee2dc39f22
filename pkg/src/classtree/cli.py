"""Command-line interface.

Subcommands: induce, label, infer, eval, train, superclass-eval, entropy-rank,
similar, traversal, export-dot. Exit codes: 0 success, 1 usage error,
2 data/format error, 3 numeric failure. All randomness sits behind --seed.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analysis, fileio
from .cluster import LINKAGES, induce_hierarchy
from .errors import (
    FormatError,
    InvalidConfigError,
    InvalidInputError,
    TrainingFailureError,
)
from .hierarchy import ClassWeights, from_json_text, to_json_text
from .infogain import build_info_gain_hierarchy
from .inference import FeatureBatch, LogitsBatch, batch_predict
from .dot import export_dot
from .losses import LossConfig
from .taxonomy import Taxonomy, build_taxonomy_hierarchy, label_nodes
from .training import HierarchyUpdate, TrainConfig, history_to_jsonl, train_linear_head

USAGE_ERROR = 1
DATA_ERROR = 2
NUMERIC_ERROR = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _load_weights(path, class_ids_path=None) -> ClassWeights:
    rows = fileio.read_matrix(path)
    if rows.ndim != 2:
        raise InvalidInputError(f"{path}: weights must be 2-D (classes x dim)")
    if class_ids_path is not None:
        ids = fileio.read_lines(class_ids_path)
    else:
        ids = [str(i) for i in range(rows.shape[0])]
    return ClassWeights(rows=rows, class_ids=tuple(ids))


def _load_hierarchy(path):
    with open(path, "r", encoding="utf-8") as handle:
        return from_json_text(handle.read())


def _load_taxonomy(edges_path, names_path) -> Taxonomy:
    with open(edges_path, "r", encoding="utf-8", newline="") as handle:
        edges_text = handle.read()
    with open(names_path, "r", encoding="utf-8", newline="") as handle:
        names_text = handle.read()
    return Taxonomy.from_tsv(edges_text, names_text)


def _batch_from(args) -> FeatureBatch:
    ids = tuple(fileio.read_lines(args.sample_ids)) if args.sample_ids else None
    if getattr(args, "logits", None):
        return LogitsBatch(samples=fileio.read_matrix(args.logits), sample_ids=ids)
    return FeatureBatch(samples=fileio.read_matrix(args.features), sample_ids=ids)


# -- subcommand handlers -------------------------------------------------------


def _cmd_induce(args) -> int:
    weights = _load_weights(args.weights, args.class_ids)
    tree = induce_hierarchy(weights, linkage=args.linkage)
    fileio.atomic_write_text(args.out, to_json_text(tree))
    return 0


def _cmd_label(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    tax = _load_taxonomy(args.edges, args.names)
    class_ids = fileio.read_lines(args.class_ids)
    labeled = label_nodes(tree, tax, class_ids)
    fileio.atomic_write_text(args.out, to_json_text(labeled))
    return 0


def _cmd_infer(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    batch = _batch_from(args)
    results = batch_predict(tree, batch, mode=args.mode)
    ids = batch.ids()
    fileio.write_predictions_csv(
        args.out,
        ids,
        [r.predicted_class for r in results],
        [float(r.class_probs[r.predicted_class]) for r in results],
    )
    return 0


def _cmd_eval(args) -> int:
    _, preds, _ = fileio.read_predictions_csv(args.predictions)
    labels = fileio.read_matrix(args.labels).reshape(-1).astype(np.int64)
    if len(labels) != len(preds):
        raise InvalidInputError(
            f"{len(preds)} predictions for {len(labels)} labels"
        )
    correct = int(np.sum(preds == labels))
    doc = {"accuracy": correct / len(labels), "correct": correct, "total": int(len(labels))}
    fileio.atomic_write_text(args.out, json.dumps(doc) + "\n")
    return 0


def _parse_loss_config(doc: dict, epochs: int) -> LossConfig:
    mode = doc.get("mode", "soft")
    base = LossConfig.for_mode(mode, horizon=int(doc.get("horizon", epochs)))
    return LossConfig(
        mode=mode,
        omega_start=float(doc.get("omega_start", base.omega_start)),
        omega_end=float(doc.get("omega_end", base.omega_end)),
        beta_start=float(doc.get("beta_start", base.beta_start)),
        beta_end=float(doc.get("beta_end", base.beta_end)),
        horizon=base.horizon,
    )


def _parse_train_config(doc: dict, seed_override=None) -> TrainConfig:
    update = None
    if doc.get("hierarchy_update") is not None:
        u = doc["hierarchy_update"]
        update = HierarchyUpdate(
            start_epoch=int(u["start_epoch"]),
            end_epoch=int(u["end_epoch"]),
            period=int(u["period"]),
        )
    seed = int(doc.get("seed", 0)) if seed_override is None else int(seed_override)
    return TrainConfig(
        epochs=int(doc.get("epochs", 100)),
        batch_size=int(doc.get("batch_size", 128)),
        learning_rate=float(doc.get("learning_rate", 0.1)),
        momentum=float(doc.get("momentum", 0.9)),
        weight_decay=float(doc.get("weight_decay", 5e-4)),
        lr_drop_points=tuple(doc.get("lr_drop_points", (3.0 / 7.0, 5.0 / 7.0))),
        lr_drop_factor=float(doc.get("lr_drop_factor", 0.1)),
        seed=seed,
        hierarchy_update=update,
    )


def _resolve_config_path(config_dir: str, value: str) -> str:
    return value if os.path.isabs(value) else os.path.join(config_dir, value)


def _cmd_train(args) -> int:
    doc = fileio.read_json(args.config)
    config_dir = os.path.dirname(os.path.abspath(args.config))

    def path_of(key, override):
        if override:
            return override
        if key not in doc:
            raise InvalidConfigError(f"run config is missing {key!r}")
        return _resolve_config_path(config_dir, doc[key])

    features_path = path_of("features", args.features)
    labels_path = path_of("labels", args.labels)
    for path in (features_path, labels_path):
        if not os.path.exists(path):
            raise InvalidConfigError(f"referenced path does not exist: {path}")

    features = fileio.read_matrix(features_path)
    labels = fileio.read_matrix(labels_path).reshape(-1).astype(np.int64)
    class_ids = None
    if doc.get("class_ids"):
        class_ids = tuple(fileio.read_lines(_resolve_config_path(config_dir, doc["class_ids"])))

    train_cfg = _parse_train_config(doc.get("train", {}), seed_override=args.seed)
    loss_cfg = _parse_loss_config(doc.get("loss", {}), epochs=train_cfg.epochs)

    hierarchy_doc = doc.get("hierarchy", {"source": "induced"})
    source = hierarchy_doc.get("source", "induced")
    initial_tree = None
    if source == "file":
        initial_tree = _load_hierarchy(
            _resolve_config_path(config_dir, hierarchy_doc["path"]))
    elif source == "taxonomy":
        tax = _load_taxonomy(
            _resolve_config_path(config_dir, hierarchy_doc["edges"]),
            _resolve_config_path(config_dir, hierarchy_doc["names"]))
        ids = class_ids or tuple(str(i) for i in range(int(labels.max()) + 1))
        initial_tree = build_taxonomy_hierarchy(tax, ids)
    elif source == "info_gain":
        fitted = build_info_gain_hierarchy(
            features, labels, max_depth=int(hierarchy_doc.get("max_depth", 16)))
        initial_tree = fitted.to_class_hierarchy()
    elif source == "induced":
        # Induced from the evolving weights: requires an update schedule.
        if loss_cfg.mode != "none" and train_cfg.hierarchy_update is None:
            raise InvalidConfigError(
                "hierarchy source 'induced' needs train.hierarchy_update "
                "(or use source 'file' with a pre-induced hierarchy)"
            )
    else:
        raise InvalidConfigError(f"unknown hierarchy source {source!r}")

    weights, tree, history = train_linear_head(
        features, labels, train_cfg, loss_cfg,
        initial_tree=initial_tree, class_ids=class_ids,
    )

    out_dir = args.out_dir or doc.get("output_dir")
    if not out_dir:
        raise InvalidConfigError("no output directory given (--out-dir or config output_dir)")
    os.makedirs(out_dir, exist_ok=True)
    fileio.write_matrix(os.path.join(out_dir, "weights.npy"), weights.rows, dtype="f8")
    fileio.atomic_write_text(os.path.join(out_dir, "history.jsonl"),
                             history_to_jsonl(history))
    if tree is not None:
        fileio.atomic_write_text(os.path.join(out_dir, "hierarchy.json"), to_json_text(tree))
    return 0


def _cmd_superclass_eval(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    hypothesis_doc = fileio.read_json(args.hypothesis)
    hypothesis = {int(k): str(v) for k, v in hypothesis_doc.items()}
    ood = FeatureBatch(samples=fileio.read_matrix(args.ood))
    labels = tuple(fileio.read_lines(args.ood_labels))
    spec = analysis.SuperclassSpec(
        node_id=args.node, hypothesis=hypothesis,
        ood_samples=ood, ood_superclass_labels=labels,
    )
    doc = {"node_accuracy": analysis.node_hypothesis_accuracy(tree, spec),
           "baseline_accuracy": None}
    if args.weights and args.class_superclass:
        weights = fileio.read_matrix(args.weights)
        mapping = {int(k): str(v) for k, v in fileio.read_json(args.class_superclass).items()}
        doc["baseline_accuracy"] = analysis.baseline_superclass_accuracy(
            weights, ood, labels, mapping)
    fileio.atomic_write_text(args.out, json.dumps(doc) + "\n")
    return 0


def _cmd_entropy_rank(args) -> int:
    ids = tuple(fileio.read_lines(args.sample_ids)) if args.sample_ids else None
    batch = FeatureBatch(samples=fileio.read_matrix(args.features), sample_ids=ids)
    if args.method == "nbdt":
        if not args.hierarchy:
            raise InvalidInputError("--method nbdt requires --hierarchy")
        report = analysis.rank_ambiguous(_load_hierarchy(args.hierarchy), batch,
                                         "nbdt_path_entropy")
    else:
        if not args.weights:
            raise InvalidInputError("--method baseline requires --weights")
        report = analysis.rank_ambiguous(fileio.read_matrix(args.weights), batch,
                                         "baseline_top2")
    fileio.atomic_write_text(args.out, report.to_json())
    return 0


def _cmd_similar(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    ids = tuple(fileio.read_lines(args.sample_ids)) if args.sample_ids else None
    pool = FeatureBatch(samples=fileio.read_matrix(args.pool), sample_ids=ids)
    top = analysis.max_similarity_examples(tree, args.node, pool, args.top_m,
                                           metric=args.metric)
    fileio.atomic_write_text(args.out, json.dumps({"node": args.node,
                                                   "sample_ids": list(top)}) + "\n")
    return 0


def _cmd_traversal(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    batch = _batch_from(args)
    counts = analysis.traversal_frequencies(tree, batch, mode=args.mode)
    edges = [{"parent": p, "child": c, "count": counts[(p, c)]}
             for p, c in sorted(counts)]
    fileio.atomic_write_text(args.out, json.dumps({"edges": edges}) + "\n")
    return 0


def _cmd_export_dot(args) -> int:
    tree = _load_hierarchy(args.hierarchy)
    class_names = fileio.read_lines(args.class_ids) if args.class_ids else None
    node_ann = None
    if args.node_annotations:
        node_ann = {int(k): str(v)
                    for k, v in fileio.read_json(args.node_annotations).items()}
    edge_ann = None
    if args.edge_annotations:
        doc = fileio.read_json(args.edge_annotations)
        edge_ann = {(int(e["parent"]), int(e["child"])): str(e["count"])
                    for e in doc.get("edges", [])}
    fileio.atomic_write_text(
        args.out,
        export_dot(tree, class_names=class_names, node_annotations=node_ann,
                   edge_annotations=edge_ann),
    )
    return 0


# -- parser wiring -------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(prog="classtree",
                     description="Weight-space decision trees over linear heads.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("induce", help="build a hierarchy from weight rows")
    p.add_argument("--weights", required=True)
    p.add_argument("--class-ids")
    p.add_argument("--linkage", choices=LINKAGES, default="ward")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_induce)

    p = sub.add_parser("label", help="label nodes with taxonomy concepts")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--class-ids", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--names", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_label)

    p = sub.add_parser("infer", help="predict classes for features or logits")
    p.add_argument("--hierarchy", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--features")
    group.add_argument("--logits")
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--sample-ids")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_infer)

    p = sub.add_parser("eval", help="accuracy of a predictions CSV against labels")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("train", help="train a linear head, optionally tree-supervised")
    p.add_argument("--config", required=True)
    p.add_argument("--features")
    p.add_argument("--labels")
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("superclass-eval", help="zero-shot node hypothesis accuracy")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--hypothesis", required=True)
    p.add_argument("--ood", required=True)
    p.add_argument("--ood-labels", required=True)
    p.add_argument("--weights")
    p.add_argument("--class-superclass")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_superclass_eval)

    p = sub.add_parser("entropy-rank", help="rank samples by ambiguity score")
    p.add_argument("--method", choices=("nbdt", "baseline"), required=True)
    p.add_argument("--hierarchy")
    p.add_argument("--weights")
    p.add_argument("--features", required=True)
    p.add_argument("--sample-ids")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_entropy_rank)

    p = sub.add_parser("similar", help="pool samples most similar to a node")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--top-m", type=int, required=True)
    p.add_argument("--metric", choices=("inner", "cosine"), default="inner")
    p.add_argument("--sample-ids")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_similar)

    p = sub.add_parser("traversal", help="per-edge predicted-path counts")
    p.add_argument("--hierarchy", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--features")
    group.add_argument("--logits")
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--sample-ids")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_traversal)

    p = sub.add_parser("export-dot", help="render a hierarchy as Graphviz DOT")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--class-ids")
    p.add_argument("--node-annotations")
    p.add_argument("--edge-annotations")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_export_dot)

    return parser


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except TrainingFailureError as exc:
        print(f"classtree: numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR
    except (InvalidInputError, InvalidConfigError, FormatError) as exc:
        print(f"classtree: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FileNotFoundError as exc:
        print(f"classtree: error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except FloatingPointError as exc:
        print(f"classtree: numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


def main() -> None:
    raise SystemExit(cli())
