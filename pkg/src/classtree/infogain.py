"""Axis-aligned decision tree grown greedily by information gain.

This is the data-dependent baseline hierarchy. It is evaluated by classic
threshold traversal, never by weight attachment; leaves carry majority
classes, and a class may own several leaves. When the fitted tree simplifies
to one leaf per class it converts to a regular Hierarchy for the comparison
experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .hierarchy import Hierarchy, Node

MIN_GAIN = 1e-12


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log(p)))


@dataclass
class SplitNode:
    id: int
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    class_index: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.class_index is not None


class InfoGainTree:
    """Fitted axis-aligned tree. `nodes[0]` is the root; samples with
    feature value <= threshold go left."""

    def __init__(self, nodes: list[SplitNode], num_classes: int):
        self.nodes = nodes
        self.num_classes = num_classes

    def predict(self, x) -> int:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        node = self.nodes[0]
        while not node.is_leaf:
            node = self.nodes[node.left if x[node.feature] <= node.threshold else node.right]
        return int(node.class_index)

    def predict_batch(self, features) -> np.ndarray:
        arr = np.asarray(features, dtype=np.float64)
        return np.array([self.predict(row) for row in arr], dtype=np.int64)

    @property
    def depth(self) -> int:
        def walk(nid: int) -> int:
            node = self.nodes[nid]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(0)

    def class_partition(self) -> dict[int, tuple[int, ...]]:
        """Leaf node ids grouped by the class they predict."""
        out: dict[int, list[int]] = {}
        for node in self.nodes:
            if node.is_leaf:
                out.setdefault(node.class_index, []).append(node.id)
        return {c: tuple(ids) for c, ids in sorted(out.items())}

    def to_class_hierarchy(self) -> Hierarchy:
        """Collapse pure subtrees and convert to a Hierarchy over classes.

        Raises invalid-input when some class still occupies more than one
        leaf after simplification (the structure then has no leaf-per-class
        form).
        """

        def classes_under(nid: int) -> set[int]:
            node = self.nodes[nid]
            if node.is_leaf:
                return {node.class_index}
            return classes_under(node.left) | classes_under(node.right)

        nodes: list[Node] = []
        next_inner = [self.num_classes]
        seen_classes: set[int] = set()

        def build(nid: int) -> tuple[int, tuple[int, ...]]:
            found = classes_under(nid)
            if len(found) == 1:
                c = found.pop()
                if c in seen_classes:
                    raise InvalidInputError(
                        f"class {c} occupies multiple leaves; no class partition exists"
                    )
                seen_classes.add(c)
                nodes.append(Node(id=c, class_index=c))
                return c, (c,)
            node = self.nodes[nid]
            built = [build(node.left), build(node.right)]
            built.sort(key=lambda item: min(item[1]))
            node_id = next_inner[0]
            next_inner[0] += 1
            nodes.append(Node(id=node_id, children=tuple(b[0] for b in built)))
            classes = tuple(sorted(c for _, cs in built for c in cs))
            return node_id, classes

        root_id, classes = build(0)
        if len(classes) != self.num_classes:
            raise InvalidInputError("fitted tree does not cover every class")
        return Hierarchy(nodes, root_id=root_id)


def _best_split(x: np.ndarray, y: np.ndarray, k: int):
    """Exhaustive search over midpoint thresholds; returns
    (gain, feature, threshold) with ties going to the lowest feature index,
    then the lowest threshold."""
    base = _entropy(np.bincount(y, minlength=k))
    n = len(y)
    best = (0.0, -1, 0.0)
    for feature in range(x.shape[1]):
        values = x[:, feature]
        order = np.argsort(values, kind="stable")
        sorted_vals = values[order]
        sorted_y = y[order]
        left_counts = np.zeros(k)
        total_counts = np.bincount(y, minlength=k).astype(float)
        for i in range(n - 1):
            left_counts[sorted_y[i]] += 1
            if sorted_vals[i] == sorted_vals[i + 1]:
                continue
            threshold = (sorted_vals[i] + sorted_vals[i + 1]) / 2.0
            n_left = i + 1
            gain = base - (
                n_left / n * _entropy(left_counts)
                + (n - n_left) / n * _entropy(total_counts - left_counts)
            )
            # Ascending feature/threshold iteration keeps the first of any
            # tied candidates, i.e. lowest feature index then lowest threshold.
            if gain > best[0] + MIN_GAIN:
                best = (gain, feature, threshold)
    return best


def build_info_gain_hierarchy(features, labels, max_depth: int) -> InfoGainTree:
    """Grow the tree greedily; splits with gain below MIN_GAIN stop growth,
    and leaves predict the majority class (ties to the lowest class index)."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if x.shape[0] != y.shape[0] or x.shape[0] < 1:
        raise InvalidInputError("features and labels are inconsistent")
    k = int(y.max()) + 1
    counts = np.bincount(y, minlength=k)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise InvalidInputError(f"class {empty} has no samples")
    if max_depth < 1:
        raise InvalidInputError("max_depth must be >= 1")

    nodes: list[SplitNode] = []

    def majority(rows: np.ndarray) -> int:
        c = np.bincount(y[rows], minlength=k)
        return int(np.argmax(c))

    def grow(rows: np.ndarray, depth: int) -> int:
        nid = len(nodes)
        nodes.append(SplitNode(id=nid))
        node = nodes[nid]
        labels_here = y[rows]
        if depth >= max_depth or len(set(labels_here.tolist())) == 1:
            node.class_index = majority(rows)
            return nid
        gain, feature, threshold = _best_split(x[rows], labels_here, k)
        if gain < MIN_GAIN or feature < 0:
            node.class_index = majority(rows)
            return nid
        node.feature = feature
        node.threshold = threshold
        mask = x[rows, feature] <= threshold
        node.left = grow(rows[mask], depth + 1)
        node.right = grow(rows[~mask], depth + 1)
        return nid

    grow(np.arange(len(y)), 0)
    return InfoGainTree(nodes, num_classes=k)
