"""Hierarchy-based diagnostics: zero-shot superclass evaluation, path-entropy
ambiguity ranking, similarity probes, and traversal statistics.

Everything here is read-only over the tree and deterministic; ranking ties are
broken by ascending sample id.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .hierarchy import ClassWeights, Hierarchy
from .inference import (
    PROB_FLOOR,
    FeatureBatch,
    batch_predict,
    soft_class_distribution,
)

AMBIGUITY_METHODS = ("nbdt_path_entropy", "baseline_top2")


@dataclass
class SuperclassSpec:
    """A hypothesis about what one inner node decides.

    hypothesis maps each child id of `node_id` to a superclass concept id;
    ood_superclass_labels holds the true superclass of each OOD sample.
    """

    node_id: int
    hypothesis: dict[int, str]
    ood_samples: FeatureBatch
    ood_superclass_labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(s) for s in self.ood_superclass_labels)
        object.__setattr__(self, "ood_superclass_labels", labels)
        if len(labels) != len(self.ood_samples):
            raise InvalidInputError("one superclass label per OOD sample required")
        values = set(self.hypothesis.values())
        missing = sorted(set(labels) - values)
        if missing:
            raise InvalidInputError(
                f"OOD labels {missing} do not appear in the hypothesis map"
            )


@dataclass
class AmbiguityReport:
    """Samples ranked by descending ambiguity score.

    ranked entries are (sample_id, score, per-node entropies along the
    prediction path); the entropy tuple is empty for the baseline method.
    """

    ranked: tuple[tuple[str, float, tuple[float, ...]], ...]
    method: str

    def to_json(self) -> str:
        doc = {
            "method": self.method,
            "ranked": [
                {"sample_id": sid, "score": score, "path_entropies": list(ent)}
                for sid, score, ent in self.ranked
            ],
        }
        return json.dumps(doc, indent=1) + "\n"


def node_hypothesis_accuracy(tree: Hierarchy, spec: SuperclassSpec) -> float:
    """Fraction of OOD samples routed to the child whose hypothesized
    superclass matches the sample's label."""
    node = tree.node(spec.node_id)
    if node.is_leaf:
        raise InvalidInputError(f"node {spec.node_id} is a leaf")
    if not tree.has_weights:
        raise InvalidInputError("hierarchy has no weights attached")
    for child in node.children:
        if child not in spec.hypothesis:
            raise InvalidInputError(f"hypothesis does not cover child {child}")
    child_weights = np.stack([tree.node(c).weight for c in node.children])
    scores = spec.ood_samples.samples @ child_weights.T
    picks = np.argmax(scores, axis=1)
    correct = sum(
        1
        for pick, label in zip(picks, spec.ood_superclass_labels)
        if spec.hypothesis[node.children[pick]] == label
    )
    return correct / len(spec.ood_samples)


def baseline_superclass_accuracy(weights, ood: FeatureBatch, labels,
                                 class_to_superclass: dict) -> float:
    """Plain argmax over the linear head; a sample counts as correct when the
    predicted class's superclass matches the sample's label."""
    rows = getattr(weights, "rows", weights)
    rows = np.asarray(rows, dtype=np.float64)
    labels = tuple(str(s) for s in labels)
    if len(labels) != len(ood):
        raise InvalidInputError("one superclass label per OOD sample required")
    mapping = {int(k): str(v) for k, v in class_to_superclass.items()}
    preds = np.argmax(ood.samples @ rows.T, axis=1)
    correct = 0
    for pred, label in zip(preds, labels):
        if int(pred) not in mapping:
            raise InvalidInputError(f"class {int(pred)} has no superclass mapping")
        correct += mapping[int(pred)] == label
    return correct / len(ood)


def path_entropy_score(tree: Hierarchy, x) -> tuple[float, tuple[float, ...]]:
    """Spread (max - min) of the normalized child-distribution entropies along
    the soft-predicted path. A depth-1 tree has a single decision, so 0."""
    result = soft_class_distribution(tree, x)
    entropies = tuple(
        dist.entropy() / math.log(len(dist.child_ids)) for dist in result.per_node
    )
    if not entropies:
        return 0.0, ()
    return float(max(entropies) - min(entropies)), entropies


def baseline_ambiguity_score(logits) -> float:
    """Two-class-confusion score from raw logits: high when the top two
    classes tie while the rest of the distribution stays concentrated.

    score = H2(top-2 renormalized)/ln 2 - H(distribution with the top-2
    entries replaced by their average)/ln K.
    """
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    k = logits.shape[0]
    if k < 3:
        raise InvalidInputError(f"need at least 3 classes, got {k}")
    shifted = logits - logits.max()
    p = np.exp(shifted)
    p /= p.sum()
    order = np.argsort(-p, kind="stable")
    p1, p2 = float(p[order[0]]), float(p[order[1]])

    pair = np.array([p1, p2]) / (p1 + p2)
    pair = np.maximum(pair, PROB_FLOOR)
    top2_entropy = float(-np.sum(pair * np.log(pair)))

    averaged = p.copy()
    averaged[order[0]] = averaged[order[1]] = (p1 + p2) / 2.0
    averaged = np.maximum(averaged, PROB_FLOOR)
    full_entropy = float(-np.sum(averaged * np.log(averaged)))

    return top2_entropy / math.log(2.0) - full_entropy / math.log(k)


def rank_ambiguous(subject, dataset: FeatureBatch, method: str) -> AmbiguityReport:
    """Score every sample with the chosen method and sort descending; equal
    scores order by ascending sample id.

    `subject` is a weighted Hierarchy for "nbdt_path_entropy" or the linear
    head's weights (ClassWeights or array) for "baseline_top2".
    """
    if method not in AMBIGUITY_METHODS:
        raise InvalidInputError(f"method must be one of {AMBIGUITY_METHODS}, got {method!r}")
    ids = dataset.ids()
    entries = []
    if method == "nbdt_path_entropy":
        if not isinstance(subject, Hierarchy):
            raise InvalidInputError("path-entropy ranking needs a Hierarchy")
        for sid, row in zip(ids, dataset.samples):
            score, entropies = path_entropy_score(subject, row)
            entries.append((sid, score, entropies))
    else:
        if isinstance(subject, Hierarchy):
            raise InvalidInputError("baseline ranking needs the weight rows, not a tree")
        rows = getattr(subject, "rows", subject)
        rows = np.asarray(rows, dtype=np.float64)
        logits = dataset.samples @ rows.T
        for sid, row in zip(ids, logits):
            entries.append((sid, float(baseline_ambiguity_score(row)), ()))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return AmbiguityReport(ranked=tuple(entries), method=method)


def max_similarity_examples(tree: Hierarchy, node_id: int, pool: FeatureBatch,
                            top_m: int, metric: str = "inner") -> tuple[str, ...]:
    """Ids of the `top_m` pool samples most similar to the node's weight
    vector, by inner product (default) or cosine; ties order by sample id."""
    if not tree.has_weights:
        raise InvalidInputError("hierarchy has no weights attached")
    if not 1 <= top_m <= len(pool):
        raise InvalidInputError(f"top_m must lie in [1, {len(pool)}], got {top_m}")
    if metric not in ("inner", "cosine"):
        raise InvalidInputError(f"metric must be 'inner' or 'cosine', got {metric!r}")
    weight = tree.node(node_id).weight
    scores = pool.samples @ weight
    if metric == "cosine":
        norms = np.linalg.norm(pool.samples, axis=1) * np.linalg.norm(weight)
        if np.any(norms == 0.0):
            raise InvalidInputError("cosine similarity undefined for zero vectors")
        scores = scores / norms
    ids = pool.ids()
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], ids[i]))
    return tuple(ids[i] for i in order[:top_m])


def traversal_frequencies(tree: Hierarchy, batch: FeatureBatch,
                          mode: str = "soft") -> dict[tuple[int, int], int]:
    """Count, per parent->child edge, how many predicted paths include it."""
    counts: dict[tuple[int, int], int] = {}
    for result in batch_predict(tree, batch, mode=mode):
        for parent, child in zip(result.path, result.path[1:]):
            counts[(parent, child)] = counts.get((parent, child), 0) + 1
    return counts
