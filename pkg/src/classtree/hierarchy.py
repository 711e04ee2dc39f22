"""Core tree data structures: class weight rows, nodes, and rooted hierarchies.

A Hierarchy is immutable after construction. Operations that "modify" a tree
(attaching weights, labeling nodes) return a new Hierarchy instance.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FormatError, InvalidInputError

# Relative tolerance for the inner-node-weight = mean-of-subtree-leaves invariant.
WEIGHT_MEAN_RTOL = 1e-12


@dataclass
class ClassWeights:
    """The K rows of a linear classification head, one D-vector per class.

    rows: (K, D) float array. class_ids: K unique strings naming the classes.
    """

    rows: np.ndarray
    class_ids: tuple[str, ...]

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise InvalidInputError(f"weight rows must be 2-D, got shape {rows.shape}")
        object.__setattr__(self, "rows", rows)
        k, d = rows.shape
        if k < 2:
            raise InvalidInputError(f"need at least 2 classes, got {k}")
        if d < 1:
            raise InvalidInputError("weight rows must have at least one component")
        if not np.all(np.isfinite(rows)):
            raise InvalidInputError("weight rows contain non-finite components")
        if np.any(np.all(rows == 0.0, axis=1)):
            bad = int(np.flatnonzero(np.all(rows == 0.0, axis=1))[0])
            raise InvalidInputError(f"weight row {bad} is the zero vector")
        ids = tuple(str(c) for c in self.class_ids)
        if len(ids) != k:
            raise InvalidInputError(f"expected {k} class ids, got {len(ids)}")
        if len(set(ids)) != k:
            raise InvalidInputError("class ids are not unique")
        object.__setattr__(self, "class_ids", ids)

    @property
    def num_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class NodeLabel:
    """A taxonomy concept assigned to a node.

    `ambiguous` lists other concept ids that tied at the same depth; it is
    in-memory metadata only and is not serialized.
    """

    id: str
    name: str
    ambiguous: tuple[str, ...] = ()


@dataclass
class Node:
    id: int
    children: tuple[int, ...] = ()
    weight: np.ndarray | None = None
    class_index: int | None = None
    label: NodeLabel | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


class Hierarchy:
    """A rooted tree over class leaves, optionally carrying node weight vectors.

    Invariants enforced at construction:
      - exactly one root, every non-root node has exactly one parent,
        the graph is connected and acyclic;
      - leaves biject with class indices 0..K-1; inner nodes have >= 2 children;
      - class_index is present iff the node is a leaf;
      - children are ordered by ascending smallest leaf class index;
      - if weights are attached, every inner weight equals the mean of its
        subtree's leaf weights to within WEIGHT_MEAN_RTOL (relative).
    """

    def __init__(self, nodes, root_id: int):
        by_id: dict[int, Node] = {}
        for node in nodes:
            if node.id in by_id:
                raise InvalidInputError(f"duplicate node id {node.id}")
            by_id[node.id] = node
        if root_id not in by_id:
            raise InvalidInputError(f"root id {root_id} not among nodes")
        self._by_id = by_id
        self.root_id = int(root_id)
        self.nodes: tuple[Node, ...] = tuple(by_id[i] for i in sorted(by_id))
        self._parent: dict[int, int] = {}
        for node in self.nodes:
            for child in node.children:
                if child not in by_id:
                    raise InvalidInputError(f"node {node.id} references missing child {child}")
                if child in self._parent:
                    raise InvalidInputError(f"node {child} has more than one parent")
                self._parent[child] = node.id
        if self.root_id in self._parent:
            raise InvalidInputError("root must not have a parent")
        self._leaf_classes: dict[int, tuple[int, ...]] = {}
        self._validate()

    # -- structure queries ---------------------------------------------------

    def node(self, node_id: int) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise InvalidInputError(f"no node with id {node_id}") from None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._by_id

    @property
    def root(self) -> Node:
        return self._by_id[self.root_id]

    def parent_id(self, node_id: int) -> int | None:
        self.node(node_id)
        return self._parent.get(node_id)

    def children(self, node_id: int) -> tuple[Node, ...]:
        return tuple(self._by_id[c] for c in self.node(node_id).children)

    def leaf_classes(self, node_id: int) -> tuple[int, ...]:
        """Sorted class indices of all leaves in the node's subtree."""
        return self._leaf_classes[node_id]

    @property
    def num_classes(self) -> int:
        return len(self._leaf_classes[self.root_id])

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def inner_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if not n.is_leaf)

    def leaf_for_class(self, class_index: int) -> Node:
        try:
            return self._by_id[self._class_to_leaf[class_index]]
        except KeyError:
            raise InvalidInputError(f"no leaf for class {class_index}") from None

    def path_from_root(self, node_id: int) -> tuple[int, ...]:
        path = [node_id]
        while path[-1] != self.root_id:
            path.append(self._parent[path[-1]])
        return tuple(reversed(path))

    @property
    def has_weights(self) -> bool:
        return all(n.weight is not None for n in self.nodes)

    @property
    def dim(self) -> int | None:
        w = self.root.weight
        return None if w is None else int(w.shape[0])

    def with_nodes(self, new_nodes) -> "Hierarchy":
        """Rebuild the hierarchy with a replacement node list (revalidates)."""
        return Hierarchy(new_nodes, self.root_id)

    # -- validation ----------------------------------------------------------

    def _validate(self):
        # Connectivity + acyclicity: iterative DFS from the root must visit
        # every node exactly once (parent uniqueness already enforced).
        seen = set()
        stack = [self.root_id]
        order = []
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise InvalidInputError(f"cycle detected at node {nid}")
            seen.add(nid)
            order.append(nid)
            stack.extend(self._by_id[nid].children)
        if len(seen) != len(self._by_id):
            missing = sorted(set(self._by_id) - seen)
            raise InvalidInputError(f"nodes unreachable from root: {missing}")

        # Leaf classes bottom-up (reverse DFS order has children first).
        for nid in reversed(order):
            node = self._by_id[nid]
            if node.is_leaf:
                if node.class_index is None:
                    raise InvalidInputError(f"leaf node {nid} lacks a class index")
                self._leaf_classes[nid] = (int(node.class_index),)
            else:
                if node.class_index is not None:
                    raise InvalidInputError(f"inner node {nid} must not carry a class index")
                if len(node.children) < 2:
                    raise InvalidInputError(f"inner node {nid} has fewer than 2 children")
                merged: list[int] = []
                for child in node.children:
                    merged.extend(self._leaf_classes[child])
                self._leaf_classes[nid] = tuple(sorted(merged))
                firsts = [min(self._leaf_classes[c]) for c in node.children]
                if firsts != sorted(firsts):
                    raise InvalidInputError(
                        f"children of node {nid} are not ordered by smallest leaf class"
                    )

        classes = self._leaf_classes[self.root_id]
        k = len(classes)
        if classes != tuple(range(k)):
            raise InvalidInputError(
                f"leaf classes must biject with 0..K-1, got {classes}"
            )
        self._class_to_leaf = {
            n.class_index: n.id for n in self.nodes if n.is_leaf
        }

        weighted = [n for n in self.nodes if n.weight is not None]
        if weighted and len(weighted) != len(self.nodes):
            raise InvalidInputError("either all nodes carry weights or none do")
        if weighted:
            dim = None
            for node in self.nodes:
                w = np.asarray(node.weight, dtype=np.float64)
                if w.ndim != 1:
                    raise InvalidInputError(f"node {node.id} weight must be a vector")
                if not np.all(np.isfinite(w)):
                    raise InvalidInputError(f"node {node.id} weight is non-finite")
                if dim is None:
                    dim = w.shape[0]
                elif w.shape[0] != dim:
                    raise InvalidInputError("node weights have mixed dimensions")
                node.weight = w
            leaf_rows = {n.class_index: n.weight for n in self.nodes if n.is_leaf}
            for node in self.nodes:
                if node.is_leaf:
                    continue
                mean = np.mean([leaf_rows[c] for c in self._leaf_classes[node.id]], axis=0)
                scale = max(1.0, float(np.max(np.abs(mean))))
                if float(np.max(np.abs(node.weight - mean))) > WEIGHT_MEAN_RTOL * scale:
                    raise InvalidInputError(
                        f"inner node {node.id} weight is not the mean of its subtree leaves"
                    )


def sort_children(children_ids, leaf_classes_of) -> tuple[int, ...]:
    """Order child ids by ascending smallest leaf class index."""
    return tuple(sorted(children_ids, key=lambda c: min(leaf_classes_of(c))))


def attach_weights(tree: Hierarchy, weights: ClassWeights) -> Hierarchy:
    """Return a copy of `tree` whose nodes carry weights derived from `weights`.

    Leaf i gets the raw row for its class; every inner node gets the arithmetic
    mean of its subtree's leaf rows. Idempotent: re-attaching the same weights
    yields an identical tree.
    """
    k = weights.num_classes
    leaf_ids = [n for n in tree.nodes if n.is_leaf]
    if len(leaf_ids) != k:
        raise InvalidInputError(
            f"tree has {len(leaf_ids)} leaves but weights describe {k} classes"
        )
    new_nodes = []
    for node in tree.nodes:
        classes = tree.leaf_classes(node.id)
        if node.is_leaf:
            w = weights.rows[classes[0]].copy()
        else:
            w = np.mean(weights.rows[list(classes)], axis=0)
        new_nodes.append(replace(node, weight=w))
    return tree.with_nodes(new_nodes)


# -- JSON interchange ---------------------------------------------------------
#
# Schema: {"root": int, "nodes": [{"id": int, "children": [int],
#          "class_index": int|null, "weight": [float]|null,
#          "label": {"id": str, "name": str}|null}]}
# Floats are written with 17 significant decimal digits so weights round-trip
# to full double precision.


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def to_json_text(tree: Hierarchy) -> str:
    parts = []
    for node in tree.nodes:
        children = "[" + ", ".join(str(c) for c in node.children) + "]"
        ci = "null" if node.class_index is None else str(int(node.class_index))
        if node.weight is None:
            weight = "null"
        else:
            weight = "[" + ", ".join(_fmt(v) for v in node.weight) + "]"
        if node.label is None:
            label = "null"
        else:
            label = '{"id": %s, "name": %s}' % (
                json.dumps(node.label.id),
                json.dumps(node.label.name),
            )
        parts.append(
            '{"id": %d, "children": %s, "class_index": %s, "weight": %s, "label": %s}'
            % (node.id, children, ci, weight, label)
        )
    return '{"root": %d, "nodes": [%s]}\n' % (tree.root_id, ", ".join(parts))


def from_json_text(text: str) -> Hierarchy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"hierarchy JSON is malformed: {exc}") from exc
    if not isinstance(doc, dict) or "root" not in doc or "nodes" not in doc:
        raise FormatError("hierarchy JSON must contain 'root' and 'nodes'")
    nodes = []
    for raw in doc["nodes"]:
        try:
            label = None
            if raw.get("label") is not None:
                label = NodeLabel(id=str(raw["label"]["id"]), name=str(raw["label"]["name"]))
            weight = None
            if raw.get("weight") is not None:
                weight = np.asarray(raw["weight"], dtype=np.float64)
            nodes.append(
                Node(
                    id=int(raw["id"]),
                    children=tuple(int(c) for c in raw.get("children", ())),
                    class_index=None if raw.get("class_index") is None else int(raw["class_index"]),
                    weight=weight,
                    label=label,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"hierarchy JSON node entry is malformed: {raw!r}") from exc
    return Hierarchy(nodes, int(doc["root"]))


def structurally_equal(a: Hierarchy, b: Hierarchy) -> bool:
    """Structural equality: ids, children, classes, labels (id+name), weights."""
    if a.root_id != b.root_id or a.num_nodes != b.num_nodes:
        return False
    for na, nb in zip(a.nodes, b.nodes):
        if (na.id, na.children, na.class_index) != (nb.id, nb.children, nb.class_index):
            return False
        la = None if na.label is None else (na.label.id, na.label.name)
        lb = None if nb.label is None else (nb.label.id, nb.label.name)
        if la != lb:
            return False
        if (na.weight is None) != (nb.weight is None):
            return False
        if na.weight is not None and not np.array_equal(na.weight, nb.weight):
            return False
    return True
