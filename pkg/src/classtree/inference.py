"""Soft and hard decision-tree inference over features or raw logits.

Soft inference scores every leaf by the product of child probabilities along
its root path and predicts the argmax leaf; hard inference descends greedily.
Both run on an immutable weighted hierarchy and are safe for concurrent use.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .hierarchy import Hierarchy

# Probabilities are floored here before any log, so log-space path products
# never produce -inf.
PROB_FLOOR = 1e-300
LOG_FLOOR = math.log(PROB_FLOOR)


@dataclass
class FeatureBatch:
    """M feature vectors of dimension D, with optional per-sample ids."""

    samples: np.ndarray
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidInputError(f"batch must be 2-D (samples x dim), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InvalidInputError("batch must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("batch contains non-finite values")
        object.__setattr__(self, "samples", arr)
        if self.sample_ids is not None:
            ids = tuple(str(s) for s in self.sample_ids)
            if len(ids) != arr.shape[0]:
                raise InvalidInputError(
                    f"{len(ids)} sample ids for {arr.shape[0]} samples"
                )
            object.__setattr__(self, "sample_ids", ids)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def ids(self) -> tuple[str, ...]:
        if self.sample_ids is not None:
            return self.sample_ids
        return tuple(str(i) for i in range(len(self)))


class LogitsBatch(FeatureBatch):
    """M logit vectors (one entry per class); inference uses subtree means."""


@dataclass
class NodeDistribution:
    """Probabilities over one inner node's children for a single sample."""

    node_id: int
    child_ids: tuple[int, ...]
    probs: np.ndarray

    def entropy(self) -> float:
        p = np.maximum(self.probs, PROB_FLOOR)
        return float(-np.sum(p * np.log(p)))


@dataclass
class PathResult:
    """A single-sample prediction: class, per-class probabilities, and the
    root-to-leaf path with each on-path decision distribution."""

    predicted_class: int
    class_probs: np.ndarray
    path: tuple[int, ...]
    per_node: tuple[NodeDistribution, ...]


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    logq = shifted - np.log(np.sum(np.exp(shifted)))
    return np.maximum(logq, LOG_FLOOR)


def _feature_scores(tree: Hierarchy, x: np.ndarray):
    if not tree.has_weights:
        raise InvalidInputError("hierarchy has no weights attached")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != tree.dim:
        raise InvalidInputError(f"feature dim {x.shape[0]} != tree dim {tree.dim}")

    def score(node_id: int) -> float:
        return float(tree.node(node_id).weight @ x)

    return score


def _logit_scores(tree: Hierarchy, logits: np.ndarray):
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    if logits.shape[0] != tree.num_classes:
        raise InvalidInputError(
            f"got {logits.shape[0]} logits for a tree over {tree.num_classes} classes"
        )

    def score(node_id: int) -> float:
        return float(np.mean(logits[list(tree.leaf_classes(node_id))]))

    return score


def _node_distribution(tree: Hierarchy, node_id: int, score) -> NodeDistribution:
    node = tree.node(node_id)
    scores = np.array([score(c) for c in node.children])
    probs = np.exp(_log_softmax(scores))
    return NodeDistribution(node_id=node_id, child_ids=node.children, probs=probs)


def node_child_probs(tree: Hierarchy, node_id: int, x) -> NodeDistribution:
    """Softmax over the inner products of each child's weight with x."""
    node = tree.node(node_id)
    if node.is_leaf:
        raise InvalidInputError(f"node {node_id} is a leaf")
    return _node_distribution(tree, node_id, _feature_scores(tree, x))


def _soft_pass(tree: Hierarchy, score) -> PathResult:
    k = tree.num_classes
    class_log = np.full(k, -np.inf)
    dists: dict[int, NodeDistribution] = {}
    log_reach = {tree.root_id: 0.0}
    stack = [tree.root_id]
    while stack:
        nid = stack.pop()
        node = tree.node(nid)
        if node.is_leaf:
            class_log[node.class_index] = log_reach[nid]
            continue
        dist = _node_distribution(tree, nid, score)
        dists[nid] = dist
        logq = np.maximum(np.log(np.maximum(dist.probs, PROB_FLOOR)), LOG_FLOOR)
        for child, lq in zip(node.children, logq):
            log_reach[child] = log_reach[nid] + lq
            stack.append(child)
    class_probs = np.exp(class_log)
    predicted = int(np.argmax(class_probs))
    path = tree.path_from_root(tree.leaf_for_class(predicted).id)
    per_node = tuple(dists[nid] for nid in path[:-1])
    return PathResult(predicted_class=predicted, class_probs=class_probs,
                      path=path, per_node=per_node)


def _hard_pass(tree: Hierarchy, score) -> PathResult:
    path = [tree.root_id]
    per_node = []
    log_prod = 0.0
    node = tree.root
    while not node.is_leaf:
        dist = _node_distribution(tree, node.id, score)
        per_node.append(dist)
        pick = int(np.argmax(dist.probs))
        log_prod += max(math.log(max(float(dist.probs[pick]), PROB_FLOOR)), LOG_FLOOR)
        node = tree.node(node.children[pick])
        path.append(node.id)
    class_probs = np.zeros(tree.num_classes)
    class_probs[node.class_index] = math.exp(log_prod)
    return PathResult(predicted_class=int(node.class_index), class_probs=class_probs,
                      path=tuple(path), per_node=tuple(per_node))


def soft_class_distribution(tree: Hierarchy, x) -> PathResult:
    """Path-probability distribution over classes for one feature vector."""
    return _soft_pass(tree, _feature_scores(tree, x))


def soft_predict(tree: Hierarchy, x) -> int:
    """Class with the largest path probability; ties go to the lowest index."""
    return soft_class_distribution(tree, x).predicted_class


def hard_predict(tree: Hierarchy, x) -> PathResult:
    """Greedy root-to-leaf descent, taking the most probable child each step.

    class_probs holds the product of the traversed decisions at the predicted
    class only; all other entries are zero.
    """
    return _hard_pass(tree, _feature_scores(tree, x))


def soft_predict_from_logits(tree: Hierarchy, logits) -> PathResult:
    """Soft inference from raw logits: a node's score is the mean of its
    subtree's leaf logits, which equals the inner product with the mean weight
    when the logits came from the same linear layer the tree was built from.
    """
    return _soft_pass(tree, _logit_scores(tree, logits))


def hard_predict_from_logits(tree: Hierarchy, logits) -> PathResult:
    """Greedy descent on subtree-mean logit scores."""
    return _hard_pass(tree, _logit_scores(tree, logits))


def _thread_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("NBDT_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidInputError(f"NBDT_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def batch_predict(tree: Hierarchy, batch: FeatureBatch, mode: str = "soft",
                  threads: int | None = None) -> list[PathResult]:
    """Apply soft or hard inference to every sample, preserving order.

    Accepts a FeatureBatch (inner-product scores) or a LogitsBatch
    (subtree-mean scores). Samples are independent, so evaluation may use a
    thread pool (capped by `threads` or NBDT_THREADS) with results identical
    to sequential evaluation.
    """
    if mode not in ("soft", "hard"):
        raise InvalidInputError(f"mode must be 'soft' or 'hard', got {mode!r}")
    if isinstance(batch, LogitsBatch):
        single = soft_predict_from_logits if mode == "soft" else hard_predict_from_logits
    elif isinstance(batch, FeatureBatch):
        single = soft_class_distribution if mode == "soft" else hard_predict
    else:
        raise InvalidInputError("batch must be a FeatureBatch or LogitsBatch")

    rows = batch.samples
    n = _thread_count(threads)
    if n == 1 or len(rows) < 32:
        return [single(tree, row) for row in rows]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(lambda row: single(tree, row), rows))
