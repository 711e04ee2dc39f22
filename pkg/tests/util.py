"""Shared generators for the test suite."""
from __future__ import annotations

import numpy as np

from classtree import ClassWeights, Hierarchy, Node, attach_weights


def random_weights(rng, k, d) -> ClassWeights:
    rows = rng.normal(size=(k, d))
    return ClassWeights(rows=rows, class_ids=tuple(f"c{i}" for i in range(k)))


def random_tree(rng, weights: ClassWeights, max_arity: int = 2) -> Hierarchy:
    """Random topology over the classes (binary by default, n-ary if asked),
    with weights attached."""
    k = weights.num_classes
    groups = [(i,) for i in range(k)]
    nodes = [Node(id=i, class_index=i) for i in range(k)]
    group_node = {(i,): i for i in range(k)}
    next_id = k
    while len(groups) > 1:
        arity = 2 if max_arity <= 2 else int(rng.integers(2, min(max_arity, len(groups)) + 1))
        arity = min(arity, len(groups))
        picks = sorted(rng.choice(len(groups), size=arity, replace=False).tolist())
        chosen = [groups[i] for i in picks]
        children = tuple(sorted((group_node[g] for g in chosen),
                                key=lambda nid: min(dict_leaves(nodes, nid))))
        merged = tuple(sorted(c for g in chosen for c in g))
        nodes.append(Node(id=next_id, children=children))
        group_node[merged] = next_id
        groups = [g for i, g in enumerate(groups) if i not in picks] + [merged]
        next_id += 1
    tree = Hierarchy(nodes, root_id=next_id - 1)
    return attach_weights(tree, weights)


def dict_leaves(nodes, nid):
    """Leaf class indices under a node id, for a nodes-in-progress list."""
    by_id = {n.id: n for n in nodes}

    def walk(i):
        node = by_id[i]
        if not node.children:
            return [node.class_index]
        out = []
        for c in node.children:
            out.extend(walk(c))
        return out

    return walk(nid)


def depth1_tree(weights: ClassWeights) -> Hierarchy:
    """Root with K leaf children: inference reduces to the plain linear layer."""
    k = weights.num_classes
    nodes = [Node(id=i, class_index=i) for i in range(k)]
    nodes.append(Node(id=k, children=tuple(range(k))))
    return attach_weights(Hierarchy(nodes, root_id=k), weights)


def hierarchical_prototypes(rng, pairs: int, d: int, pair_pull: float = 0.35,
                            quad_pull: float = 0.2, scale: float = 1.0) -> np.ndarray:
    """Class prototypes with planted pair/quad structure so ward clustering
    recovers a known balanced tree. Classes 2i and 2i+1 form a pair; pairs
    (2j, 2j+1) form a quad."""
    k = 2 * pairs
    assert d >= k + pairs + (pairs + 1) // 2
    rows = np.zeros((k, d))
    for i in range(k):
        rows[i, i] = 1.0
        rows[i, k + i // 2] = pair_pull
        rows[i, k + pairs + i // 4] = quad_pull
    return scale * rows


def make_blobs(rng, k: int, d: int, per_class: int, noise: float = 0.25,
               prototype_scale: float = 1.5):
    """Linearly separable Gaussian blobs around random unit prototypes."""
    prototypes = rng.normal(size=(k, d))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
    prototypes *= prototype_scale
    features = np.zeros((k * per_class, d))
    labels = np.zeros(k * per_class, dtype=np.int64)
    for c in range(k):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = prototypes[c] + noise * rng.normal(size=(per_class, d))
        labels[block] = c
    order = rng.permutation(k * per_class)
    return features[order], labels[order], prototypes
